#include "sparselab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

#include "parallel.hpp"
#include "sparselab/random.hpp"

namespace sparselab {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

std::string to_string(OpTag t) {
    switch (t) {
        case OpTag::maximal: return "maximal";
        case OpTag::hilbert: return "hilbert";
        case OpTag::calderon_commutator: return "calderon_commutator";
        case OpTag::lp_square: return "lp_square";
        case OpTag::lacunary_carleson: return "lacunary_carleson";
        case OpTag::variation: return "variation";
        case OpTag::global_average: return "global_average";
        case OpTag::custom_kernel: return "custom_kernel";
    }
    return "maximal";
}

OpTag op_tag_from_string(const std::string& s) {
    for (OpTag t : {OpTag::maximal, OpTag::hilbert, OpTag::calderon_commutator, OpTag::lp_square, OpTag::lacunary_carleson,
                    OpTag::variation, OpTag::global_average, OpTag::custom_kernel})
        if (to_string(t) == s) return t;
    throw std::invalid_argument("unknown operator tag: " + s);
}

OperatorSpec OperatorSpec::maximal(double r, int m) {
    OperatorSpec s;
    s.tag = OpTag::maximal;
    s.r = r;
    s.m = m;
    return s;
}
OperatorSpec OperatorSpec::hilbert(double truncation) {
    OperatorSpec s;
    s.tag = OpTag::hilbert;
    s.truncation = truncation;
    return s;
}
OperatorSpec OperatorSpec::calderon() {
    OperatorSpec s;
    s.tag = OpTag::calderon_commutator;
    s.m = 2;
    return s;
}
OperatorSpec OperatorSpec::lp_square(std::vector<double> scales, std::string bump) {
    OperatorSpec s;
    s.tag = OpTag::lp_square;
    s.scales = std::move(scales);
    s.bump = std::move(bump);
    return s;
}
OperatorSpec OperatorSpec::lacunary_carleson(std::vector<double> freqs) {
    OperatorSpec s;
    s.tag = OpTag::lacunary_carleson;
    s.freqs = std::move(freqs);
    return s;
}
OperatorSpec OperatorSpec::variation(double q, std::vector<double> truncations) {
    OperatorSpec s;
    s.tag = OpTag::variation;
    s.q = q;
    s.truncations = std::move(truncations);
    return s;
}
OperatorSpec OperatorSpec::global_average() {
    OperatorSpec s;
    s.tag = OpTag::global_average;
    return s;
}
OperatorSpec OperatorSpec::custom_kernel(std::vector<double> table) {
    OperatorSpec s;
    s.tag = OpTag::custom_kernel;
    s.kernel = std::move(table);
    return s;
}

void OperatorSpec::validate(int n_atoms) const {
    if (m < 1) throw std::invalid_argument("operator arity must be >= 1");
    if (!(r >= 1.0)) throw std::invalid_argument("reduction exponent r must be >= 1");
    if (tag != OpTag::maximal && tag != OpTag::calderon_commutator && m != 1) throw std::invalid_argument(to_string(tag) + " is linear (m = 1)");
    if (tag == OpTag::calderon_commutator && m != 2) throw std::invalid_argument("calderon_commutator is bilinear (m = 2)");
    if (tag == OpTag::lp_square) {
        if (scales.empty()) throw std::invalid_argument("lp_square needs a non-empty scale list");
        for (size_t i = 0; i < scales.size(); ++i) {
            if (!(scales[i] > 0.0)) throw std::invalid_argument("lp_square scales must be positive");
            if (i > 0 && !(scales[i] > scales[i - 1])) throw std::invalid_argument("lp_square scales must be strictly increasing");
        }
        if (bump != "gaussian" && bump != "box") throw std::invalid_argument("lp_square bump must be gaussian or box");
    }
    if (tag == OpTag::lacunary_carleson) {
        if (freqs.empty()) throw std::invalid_argument("lacunary_carleson needs a non-empty frequency list");
        for (size_t i = 0; i < freqs.size(); ++i) {
            if (freqs[i] < 0.0) throw std::invalid_argument("frequencies must be nonnegative");
            if (i > 0 && (!(freqs[i] > freqs[i - 1]) || freqs[i] < 2.0 * freqs[i - 1])) throw std::invalid_argument("frequency list is not lacunary");
        }
    }
    if (tag == OpTag::variation) {
        if (!(q > 1.0)) throw std::invalid_argument("variation needs q > 1");
        if (truncations.empty()) throw std::invalid_argument("variation needs a non-empty truncation list");
        for (size_t i = 1; i < truncations.size(); ++i)
            if (!(truncations[i] < truncations[i - 1])) throw std::invalid_argument("variation truncations must be strictly decreasing");
    }
    if (tag == OpTag::custom_kernel && static_cast<long>(kernel.size()) != static_cast<long>(n_atoms) * n_atoms)
        throw std::invalid_argument("custom kernel table must be N x N");
}

std::string OperatorSpec::name() const {
    if (tag == OpTag::maximal) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "maximal(r=%g,m=%d)", r, m);
        return buf;
    }
    return to_string(tag);
}

nlohmann::json to_json(const OperatorSpec& s) {
    nlohmann::json j;
    j["tag"] = to_string(s.tag);
    j["m"] = s.m;
    j["r"] = s.r;
    if (s.tag == OpTag::hilbert) j["truncation"] = s.truncation;
    if (s.tag == OpTag::lp_square) {
        j["scales"] = s.scales;
        j["bump"] = s.bump;
    }
    if (s.tag == OpTag::lacunary_carleson) j["freqs"] = s.freqs;
    if (s.tag == OpTag::variation) {
        j["q"] = s.q;
        j["truncations"] = s.truncations;
    }
    if (s.tag == OpTag::custom_kernel) j["kernel"] = s.kernel;
    return j;
}

OperatorSpec operator_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {"tag", "m", "r", "truncation", "scales", "bump", "freqs", "q", "truncations", "kernel"};
    if (!j.is_object()) throw std::invalid_argument("operator must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) throw std::invalid_argument("unknown operator key: " + it.key());
    OperatorSpec s;
    s.tag = op_tag_from_string(j.at("tag").get<std::string>());
    s.m = j.value("m", s.tag == OpTag::calderon_commutator ? 2 : 1);
    s.r = j.value("r", 1.0);
    s.truncation = j.value("truncation", 0.0);
    s.scales = j.value("scales", std::vector<double>{});
    s.bump = j.value("bump", std::string("gaussian"));
    s.freqs = j.value("freqs", std::vector<double>{});
    s.q = j.value("q", 2.0);
    s.truncations = j.value("truncations", std::vector<double>{});
    s.kernel = j.value("kernel", std::vector<double>{});
    return s;
}

int CommutatorSpec::order() const {
    int k = 0;
    for (int a : alpha) k += a;
    return k;
}

std::vector<int> CommutatorSpec::tau() const {
    std::vector<int> t;
    for (size_t i = 0; i < alpha.size(); ++i)
        if (alpha[i] != 0) t.push_back(static_cast<int>(i));
    return t;
}

// Per-evaluation-point prefix sums of kernel contributions, over y in [lo, hi).
struct Operator::Rows {
    int lo = 0, hi = 0;
    std::vector<double> pre;   // ncomp blocks of (hi - lo + 1)
    std::vector<double> scratch;
    int ncomp = 1;
    double partial(int c, int a, int b) const {
        a = std::clamp(a, lo, hi);
        b = std::clamp(b, lo, hi);
        const double* p = pre.data() + static_cast<size_t>(c) * (hi - lo + 1);
        return p[b - lo] - p[a - lo];
    }
    double total(int c) const { return partial(c, lo, hi); }
};

Operator::Operator(OperatorSpec spec, const BallBasis& basis) : spec_(std::move(spec)), basis_(&basis), n_(basis.space.size()) {
    spec_.validate(n_);
    if (has_kernel() && basis.space.dim != 1) throw std::invalid_argument("kernel operators are implemented on 1D spaces");
    switch (spec_.tag) {
        case OpTag::lp_square: ncomp_ = static_cast<int>(spec_.scales.size()); break;
        case OpTag::lacunary_carleson: ncomp_ = 2 * static_cast<int>(spec_.freqs.size()); break;
        case OpTag::variation: ncomp_ = static_cast<int>(spec_.truncations.size()); break;
        default: ncomp_ = 1;
    }
}

double Operator::comp_norm(const double* v) const {
    switch (spec_.tag) {
        case OpTag::lp_square: {
            double s = 0.0;
            for (int c = 0; c < ncomp_; ++c) s += v[c] * v[c];
            return std::sqrt(s);
        }
        case OpTag::lacunary_carleson: {
            double s = 0.0;
            for (int c = 0; c + 1 < ncomp_; c += 2) s = std::max(s, std::hypot(v[c], v[c + 1]));
            return s;
        }
        case OpTag::variation: return variation_norm(std::vector<double>(v, v + ncomp_), spec_.q);
        default: return std::abs(v[0]);
    }
}

namespace {

void support_range(const std::vector<GridFunction>& fs, int n, int& lo, int& hi) {
    lo = n;
    hi = 0;
    for (const auto& f : fs)
        for (int i = 0; i < n; ++i)
            if (f[static_cast<size_t>(i)] != 0.0) {
                lo = std::min(lo, i);
                hi = std::max(hi, i + 1);
            }
    if (lo >= hi) lo = hi = 0;
}

double binom(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

double ipow(double b, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

double bump_profile(const std::string& bump, double u) {
    if (bump == "box") return std::abs(u) < 0.5 ? 1.0 : 0.0;
    return std::exp(-M_PI * u * u);
}

}  // namespace

void Operator::build_rows(const std::vector<GridFunction>& fs, int x, Rows& rows, const CommutatorSpec* c) const {
    // callers set rows.lo / rows.hi; slot-1 calderon prefixes live in rows.scratch
    const auto& sp = basis_->space;
    const auto& mu = sp.masses;
    const int len = rows.hi - rows.lo;
    rows.ncomp = ncomp_;
    rows.pre.assign(static_cast<size_t>(ncomp_) * (len + 1), 0.0);
    const double cx = sp.coord(x);
    auto eff = [&](int slot, int y) {
        double v = fs[static_cast<size_t>(slot)][static_cast<size_t>(y)];
        if (c && !c->alpha.empty() && c->alpha[static_cast<size_t>(slot)] > 0)
            v *= ipow(c->symbols[static_cast<size_t>(slot)][static_cast<size_t>(x)] - c->symbols[static_cast<size_t>(slot)][static_cast<size_t>(y)],
                      c->alpha[static_cast<size_t>(slot)]);
        return v;
    };
    auto put = [&](int comp, int y, double v) { rows.pre[static_cast<size_t>(comp) * (len + 1) + static_cast<size_t>(y - rows.lo + 1)] = v; };

    if (spec_.tag == OpTag::hilbert && (c == nullptr || c->alpha.empty() || c->alpha[0] == 0)) {
        const double* f = fs[0].data();
        double* out = rows.pre.data() + 1 - rows.lo;
        for (int y = rows.lo; y < rows.hi; ++y) {
            const double d = cx - sp.coord(y);
            if (y != x && std::abs(d) >= spec_.truncation) out[y] = f[y] * mu[static_cast<size_t>(y)] / d;
        }
        for (int i = 0; i < len; ++i) rows.pre[static_cast<size_t>(i) + 1] += rows.pre[static_cast<size_t>(i)];
        return;
    }
    if (spec_.tag == OpTag::calderon_commutator && (c == nullptr || c->alpha.empty() || (c->alpha[0] == 0 && c->alpha[1] == 0))) {
        const double* p = rows.scratch.data();
        const double* f2 = fs[1].data();
        double* out = rows.pre.data() + 1 - rows.lo;
        for (int y = rows.lo; y < rows.hi; ++y) {
            if (y == x) continue;
            const double d = cx - sp.coord(y);
            double s = y < x ? p[x] - p[y + 1] : p[y] - p[x + 1];
            out[y] = (y > x ? -1.0 : 1.0) / (d * d) * f2[y] * mu[static_cast<size_t>(y)] * s;
        }
        for (int i = 0; i < len; ++i) rows.pre[static_cast<size_t>(i) + 1] += rows.pre[static_cast<size_t>(i)];
        return;
    }
    for (int y = rows.lo; y < rows.hi; ++y) {
        const double cy = sp.coord(y);
        const double d = cx - cy;
        switch (spec_.tag) {
            case OpTag::hilbert:
                if (y != x && std::abs(d) >= spec_.truncation) put(0, y, eff(0, y) * mu[static_cast<size_t>(y)] / d);
                break;
            case OpTag::global_average: put(0, y, eff(0, y) * mu[static_cast<size_t>(y)]); break;
            case OpTag::custom_kernel:
                put(0, y, spec_.kernel[static_cast<size_t>(x) * n_ + y] * eff(0, y) * mu[static_cast<size_t>(y)]);
                break;
            case OpTag::lp_square: {
                double v = eff(0, y) * mu[static_cast<size_t>(y)];
                for (int k = 0; k < ncomp_; ++k) {
                    double t = spec_.scales[static_cast<size_t>(k)];
                    double psi = bump_profile(spec_.bump, d / t) / t - bump_profile(spec_.bump, d / (2.0 * t)) / (2.0 * t);
                    put(k, y, psi * v);
                }
                break;
            }
            case OpTag::lacunary_carleson:
                if (y != x) {
                    double v = eff(0, y) * mu[static_cast<size_t>(y)] / d;
                    for (size_t k = 0; k < spec_.freqs.size(); ++k) {
                        double ph = kTwoPi * spec_.freqs[k] * cy;
                        put(static_cast<int>(2 * k), y, std::cos(ph) * v);
                        put(static_cast<int>(2 * k + 1), y, std::sin(ph) * v);
                    }
                }
                break;
            case OpTag::variation:
                if (y != x) {
                    double v = eff(0, y) * mu[static_cast<size_t>(y)] / d;
                    for (int k = 0; k < ncomp_; ++k)
                        if (std::abs(d) > spec_.truncations[static_cast<size_t>(k)]) put(k, y, v);
                }
                break;
            case OpTag::calderon_commutator:
                if (y != x) {
                    // sum of slot-1 contributions strictly between x and y
                    int a = std::min(x, y) + 1, b = std::max(x, y);
                    double s = 0.0;
                    if (a < b) {
                        int alpha1 = (c && !c->alpha.empty()) ? c->alpha[0] : 0;
                        const int stride = n_ + 1;
                        double bx = alpha1 > 0 ? c->symbols[0][static_cast<size_t>(x)] : 0.0;
                        for (int k = 0; k <= alpha1; ++k) {
                            const double* p = rows.scratch.data() + static_cast<size_t>(k) * stride;
                            s += binom(alpha1, k) * ipow(bx, alpha1 - k) * (p[b] - p[a]);
                        }
                    }
                    double sign = cy > cx ? -1.0 : 1.0;
                    put(0, y, sign / (d * d) * eff(1, y) * mu[static_cast<size_t>(y)] * s);
                }
                break;
            case OpTag::maximal: break;
        }
    }
    for (int k = 0; k < ncomp_; ++k) {
        double* p = rows.pre.data() + static_cast<size_t>(k) * (len + 1);
        for (int i = 0; i < len; ++i) p[i + 1] += p[i];
    }
}

namespace {

// calderon slot-1 prefix sums of (-b1)^k f1 mu, stored in rows.scratch
void prepare_slot1(const BallBasis& basis, const std::vector<GridFunction>& fs, const CommutatorSpec* c, std::vector<double>& scratch) {
    const int n = basis.space.size();
    int alpha1 = (c && !c->alpha.empty()) ? c->alpha[0] : 0;
    scratch.assign(static_cast<size_t>(alpha1 + 1) * (n + 1), 0.0);
    for (int k = 0; k <= alpha1; ++k) {
        double* p = scratch.data() + static_cast<size_t>(k) * (n + 1);
        for (int i = 0; i < n; ++i) {
            double v = fs[0][static_cast<size_t>(i)] * basis.space.masses[static_cast<size_t>(i)];
            if (k > 0) v *= ipow(-c->symbols[0][static_cast<size_t>(i)], k);
            p[i + 1] = p[i] + v;
        }
    }
}

std::vector<int> points_of(const BallBasis& basis, int ball, int cap) {
    const Ball& b = basis.ball(ball);
    std::vector<int> pts;
    const int nx = basis.space.shape[0];
    int count = b.atoms();
    if (cap <= 0 || count <= cap) {
        for (int y = b.lo[1]; y < b.hi[1]; ++y)
            for (int x = b.lo[0]; x < b.hi[0]; ++x) pts.push_back(y * nx + x);
        return pts;
    }
    for (int k = 0; k < cap; ++k) {
        int idx = static_cast<int>(static_cast<long>(k) * (count - 1) / (cap - 1));
        int w = b.hi[0] - b.lo[0];
        pts.push_back((b.lo[1] + idx / w) * nx + b.lo[0] + idx % w);
    }
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

}  // namespace

GridFunction Operator::apply(const std::vector<GridFunction>& fs, const std::vector<char>* where) const {
    if (static_cast<int>(fs.size()) != spec_.m) throw std::invalid_argument("operator arity mismatch");
    for (const auto& f : fs)
        if (static_cast<int>(f.size()) != n_) throw std::invalid_argument("function length mismatch");
    if (spec_.tag == OpTag::maximal) return maximal_multi(*basis_, fs, spec_.r);
    GridFunction out(static_cast<size_t>(n_), 0.0);
    Rows rows;
    support_range(fs, n_, rows.lo, rows.hi);
    if (rows.lo == rows.hi) return out;
    if (spec_.tag == OpTag::calderon_commutator) prepare_slot1(*basis_, fs, nullptr, rows.scratch);
    std::vector<double> tot(static_cast<size_t>(ncomp_));
    for (int x = 0; x < n_; ++x) {
        if (where && !(*where)[static_cast<size_t>(x)]) continue;
        build_rows(fs, x, rows);
        for (int c = 0; c < ncomp_; ++c) tot[static_cast<size_t>(c)] = rows.total(c);
        out[static_cast<size_t>(x)] = comp_norm(tot.data());
    }
    return out;
}

GridFunction Operator::apply_commutator(const CommutatorSpec& cs, const std::vector<GridFunction>& fs) const {
    if (static_cast<int>(cs.alpha.size()) != spec_.m || static_cast<int>(cs.symbols.size()) != spec_.m)
        throw std::invalid_argument("commutator needs one symbol and one alpha entry per slot");
    for (int a : cs.alpha)
        if (a < 0) throw std::invalid_argument("commutator alpha must be nonnegative");
    if (cs.order() == 0) return apply(fs);
    GridFunction out(static_cast<size_t>(n_), 0.0);
    if (spec_.tag == OpTag::maximal) {
        const auto& mu = basis_->space.masses;
        const int nx = basis_->space.shape[0];
        const double r = spec_.r;
        for (int x = 0; x < n_; ++x) {
            double best = 0.0;
            for (int id : basis_->containing(x)) {
                const Ball& b = basis_->ball(id);
                double prod = 1.0;
                for (int i = 0; i < spec_.m; ++i) {
                    double s = 0.0;
                    int a = cs.alpha[static_cast<size_t>(i)];
                    double bx = cs.symbols[static_cast<size_t>(i)][static_cast<size_t>(x)];
                    for (int yy = b.lo[1]; yy < b.hi[1]; ++yy)
                        for (int xx = b.lo[0]; xx < b.hi[0]; ++xx) {
                            auto y = static_cast<size_t>(yy * nx + xx);
                            double v = std::abs(fs[static_cast<size_t>(i)][y]) * std::pow(std::abs(bx - cs.symbols[static_cast<size_t>(i)][y]), a);
                            s += std::pow(v, r) * mu[y];
                        }
                    prod *= std::pow(s / b.measure, 1.0 / r);
                }
                best = std::max(best, prod);
            }
            out[static_cast<size_t>(x)] = best;
        }
        return out;
    }
    Rows rows;
    support_range(fs, n_, rows.lo, rows.hi);
    if (rows.lo == rows.hi) return out;
    if (spec_.tag == OpTag::calderon_commutator) prepare_slot1(*basis_, fs, &cs, rows.scratch);
    std::vector<double> tot(static_cast<size_t>(ncomp_));
    for (int x = 0; x < n_; ++x) {
        build_rows(fs, x, rows, &cs);
        for (int c = 0; c < ncomp_; ++c) tot[static_cast<size_t>(c)] = rows.total(c);
        out[static_cast<size_t>(x)] = comp_norm(tot.data());
    }
    return out;
}

std::vector<int> Operator::hulls_containing(int x) const {
    std::vector<int> hs;
    for (int id : basis_->containing(x)) hs.push_back(basis_->hull[static_cast<size_t>(id)]);
    std::sort(hs.begin(), hs.end());
    hs.erase(std::unique(hs.begin(), hs.end()), hs.end());
    return hs;
}

namespace {

struct PowIntegrators {
    std::vector<Integrator> ins;
    PowIntegrators(const BallBasis& basis, const std::vector<GridFunction>& fs, double r) {
        for (const auto& f : fs) {
            GridFunction p(f.size());
            for (size_t i = 0; i < f.size(); ++i) p[i] = r == 1.0 ? std::abs(f[i]) : std::pow(std::abs(f[i]), r);
            ins.emplace_back(basis.space, p);
        }
    }
};

// prod_i <f_i 1_R>_{C,r}; R = -1 means Sigma
double restricted_product(const BallBasis& basis, const PowIntegrators& pi, const Ball& c, int region, double r) {
    Ball x = c;
    if (region >= 0) {
        const Ball& h = basis.ball(region);
        for (size_t d = 0; d < 2; ++d) {
            x.lo[d] = std::max(c.lo[d], h.lo[d]);
            x.hi[d] = std::min(c.hi[d], h.hi[d]);
        }
        if (x.lo[0] >= x.hi[0] || x.lo[1] >= x.hi[1]) return 0.0;
    }
    double prod = 1.0;
    for (const auto& in : pi.ins) {
        double a = std::max(0.0, in.over(x)) / c.measure;
        prod *= r == 1.0 ? a : std::pow(a, 1.0 / r);
    }
    return prod;
}

double maximal_at(const BallBasis& basis, const PowIntegrators& pi, int x, int region, double r) {
    double best = 0.0;
    for (int id : basis.containing(x)) best = std::max(best, restricted_product(basis, pi, basis.ball(id), region, r));
    return best;
}

}  // namespace

GridFunction Operator::grand_maximal(const std::vector<GridFunction>& fs, const std::vector<char>* where) const {
    GridFunction out(static_cast<size_t>(n_), 0.0);
    if (spec_.tag == OpTag::maximal) {
        PowIntegrators pi(*basis_, fs, spec_.r);
        for (int x = 0; x < n_; ++x) {
            if (where && !(*where)[static_cast<size_t>(x)]) continue;
            double full = maximal_at(*basis_, pi, x, -1, spec_.r);
            double best = 0.0;
            if (basis_->tree_structured()) {
                // M(f 1_H)(x) is the running max of chain averages up to H; the smallest hull gives the largest gap
                int h = basis_->hull[static_cast<size_t>(basis_->leaf(x))];
                double run = 0.0;
                for (int v = basis_->leaf(x); v >= 0; v = basis_->parent[static_cast<size_t>(v)]) {
                    run = std::max(run, restricted_product(*basis_, pi, basis_->ball(v), -1, spec_.r));
                    if (v == h) break;
                }
                best = full - run;
            } else {
                for (int h : hulls_containing(x)) best = std::max(best, full - maximal_at(*basis_, pi, x, h, spec_.r));
            }
            out[static_cast<size_t>(x)] = std::max(0.0, best);
        }
        return out;
    }
    Rows rows;
    support_range(fs, n_, rows.lo, rows.hi);
    if (rows.lo == rows.hi) return out;
    if (spec_.tag == OpTag::calderon_commutator) prepare_slot1(*basis_, fs, nullptr, rows.scratch);
    std::vector<double> diff(static_cast<size_t>(ncomp_));
    for (int x = 0; x < n_; ++x) {
        if (where && !(*where)[static_cast<size_t>(x)]) continue;
        build_rows(fs, x, rows);
        double best = 0.0;
        for (int h : hulls_containing(x)) {
            const Ball& hb = basis_->ball(h);
            if (hb.lo[0] <= rows.lo && hb.hi[0] >= rows.hi) continue;
            for (int c = 0; c < ncomp_; ++c) diff[static_cast<size_t>(c)] = rows.total(c) - rows.partial(c, hb.lo[0], hb.hi[0]);
            best = std::max(best, comp_norm(diff.data()));
        }
        out[static_cast<size_t>(x)] = best;
    }
    return out;
}

GridFunction Operator::truncation_gap(const std::vector<GridFunction>& fs, int outer, int inner, int at, int cap) const {
    GridFunction out(static_cast<size_t>(n_), 0.0);
    std::vector<int> pts = points_of(*basis_, at, cap);
    if (spec_.tag == OpTag::maximal) {
        PowIntegrators pi(*basis_, fs, spec_.r);
        for (int x : pts)
            out[static_cast<size_t>(x)] = std::abs(maximal_at(*basis_, pi, x, outer, spec_.r) - maximal_at(*basis_, pi, x, inner, spec_.r));
        return out;
    }
    Rows rows;
    support_range(fs, n_, rows.lo, rows.hi);
    if (rows.lo == rows.hi) return out;
    if (spec_.tag == OpTag::calderon_commutator) prepare_slot1(*basis_, fs, nullptr, rows.scratch);
    std::vector<double> diff(static_cast<size_t>(ncomp_));
    auto part = [&](int c, int ball) { return ball < 0 ? rows.total(c) : rows.partial(c, basis_->ball(ball).lo[0], basis_->ball(ball).hi[0]); };
    for (int x : pts) {
        build_rows(fs, x, rows);
        for (int c = 0; c < ncomp_; ++c) diff[static_cast<size_t>(c)] = part(c, outer) - part(c, inner);
        out[static_cast<size_t>(x)] = comp_norm(diff.data());
    }
    return out;
}

double Operator::tail_oscillation(const std::vector<GridFunction>& fs, int ball) const {
    const int h = basis_->hull[static_cast<size_t>(ball)];
    std::vector<int> pts = points_of(*basis_, ball, 48);
    std::vector<std::vector<double>> tails;
    if (spec_.tag == OpTag::maximal) {
        PowIntegrators pi(*basis_, fs, spec_.r);
        for (int x : pts) tails.push_back({maximal_at(*basis_, pi, x, -1, spec_.r) - maximal_at(*basis_, pi, x, h, spec_.r)});
    } else {
        Rows rows;
        support_range(fs, n_, rows.lo, rows.hi);
        if (rows.lo == rows.hi) return 0.0;
        if (spec_.tag == OpTag::calderon_commutator) prepare_slot1(*basis_, fs, nullptr, rows.scratch);
        const Ball& hb = basis_->ball(h);
        for (int x : pts) {
            build_rows(fs, x, rows);
            std::vector<double> t(static_cast<size_t>(ncomp_));
            for (int c = 0; c < ncomp_; ++c) t[static_cast<size_t>(c)] = rows.total(c) - rows.partial(c, hb.lo[0], hb.hi[0]);
            tails.push_back(std::move(t));
        }
    }
    double best = 0.0;
    std::vector<double> d(static_cast<size_t>(ncomp_));
    for (size_t a = 0; a < tails.size(); ++a)
        for (size_t b = a + 1; b < tails.size(); ++b) {
            for (size_t c = 0; c < d.size(); ++c) d[c] = tails[a][c] - tails[b][c];
            best = std::max(best, spec_.tag == OpTag::maximal ? std::abs(d[0]) : comp_norm(d.data()));
        }
    return best;
}

double Operator::kernel_value(int x, const std::vector<int>& ys) const {
    const auto& sp = basis_->space;
    double cx = sp.coord(x);
    switch (spec_.tag) {
        case OpTag::hilbert: {
            double d = cx - sp.coord(ys.at(0));
            return ys[0] == x || std::abs(d) < spec_.truncation ? 0.0 : 1.0 / d;
        }
        case OpTag::calderon_commutator: {
            double y1 = sp.coord(ys.at(0)), y2 = sp.coord(ys.at(1));
            if (ys[1] == x) return 0.0;
            bool between = std::min(cx, y2) < y1 && y1 < std::max(cx, y2);
            double sign = y2 > cx ? -1.0 : 1.0;
            return between ? sign / ((cx - y2) * (cx - y2)) : 0.0;
        }
        case OpTag::global_average: return 1.0;
        case OpTag::custom_kernel: return spec_.kernel[static_cast<size_t>(x) * n_ + ys.at(0)];
        default: throw std::invalid_argument("kernel_value: scalar kernel tags only");
    }
}

double variation_norm(const std::vector<double>& a, double q) {
    if (!(q > 1.0)) throw std::invalid_argument("variation needs q > 1");
    const size_t n = a.size();
    if (n < 2) return 0.0;
    std::vector<double> best(n, 0.0);
    double top = 0.0;
    for (size_t j = 1; j < n; ++j) {
        for (size_t i = 0; i < j; ++i) best[j] = std::max(best[j], best[i] + std::pow(std::abs(a[i] - a[j]), q));
        top = std::max(top, best[j]);
    }
    return std::pow(top, 1.0 / q);
}

double variation_norm_bruteforce(const std::vector<double>& a, double q) {
    const size_t n = a.size();
    if (n > 20) throw std::invalid_argument("brute force variation limited to n <= 20");
    double top = 0.0;
    for (unsigned long mask = 0; mask < (1UL << n); ++mask) {
        double s = 0.0;
        long prev = -1;
        for (size_t i = 0; i < n; ++i)
            if (mask & (1UL << i)) {
                if (prev >= 0) s += std::pow(std::abs(a[static_cast<size_t>(prev)] - a[i]), q);
                prev = static_cast<long>(i);
            }
        top = std::max(top, s);
    }
    return std::pow(top, 1.0 / q);
}

GridFunction lacunary_carleson(const BallBasis& basis, const GridFunction& f, const std::vector<double>& freqs) {
    Operator op(OperatorSpec::lacunary_carleson(freqs), basis);
    return op.apply({f});
}

namespace {

std::vector<GridFunction> sample_inputs(const Operator& op, std::uint64_t seed, std::uint64_t sample, bool normalize) {
    std::vector<GridFunction> fs;
    for (int i = 0; i < op.arity(); ++i) {
        GridFunction f = corpus_function(Recipe::mixed, op.basis().space, seed, sample * 16 + static_cast<std::uint64_t>(i));
        if (normalize) {
            double nrm = lp_norm(op.basis().space, f, op.r());
            for (auto& v : f) v /= nrm;
        }
        fs.push_back(std::move(f));
    }
    return fs;
}

using detail::parallel_for;

double prod_average(const BallBasis& basis, const std::vector<GridFunction>& fs, int ball, double r, bool super) {
    double p = 1.0;
    for (const auto& f : fs) p *= super ? super_average(basis, f, ball, r) : ball_average(basis, f, ball, r);
    return p;
}

// expansion ball for (T1): kernel tags take the next ball past the hull, the maximal tag takes its hull
int expansion_ball(const Operator& op, int b0) {
    const BallBasis& basis = op.basis();
    int h = basis.hull[static_cast<size_t>(b0)];
    const Ball& hb = basis.ball(h);
    int next = -1;
    if (basis.tree_structured()) {
        next = basis.parent[static_cast<size_t>(h)];
    } else {
        std::array<int, 2> lo = hb.lo, hi = hb.hi;
        for (size_t d = 0; d < static_cast<size_t>(basis.space.dim); ++d) {
            int w = hb.hi[d] - hb.lo[d];
            int ext = d == 0 ? basis.space.shape[0] : basis.space.shape[1];
            lo[d] = std::max(0, hb.lo[d] - (w + 1) / 2);
            hi[d] = std::min(ext, hb.hi[d] + (w + 1) / 2);
        }
        next = basis.smallest_containing(lo, hi);
        if (next == h) next = -1;
    }
    if (next < 0) return -1;
    return op.spec().tag == OpTag::maximal ? basis.hull[static_cast<size_t>(next)] : next;
}

std::vector<int> sample_balls(const BallBasis& basis, std::mt19937_64& rng, int count) {
    std::vector<int> ids;
    if (basis.size() <= count) {
        for (int i = 0; i < basis.size(); ++i) ids.push_back(i);
        return ids;
    }
    // stratify by size so large balls are not starved
    std::uniform_int_distribution<int> pick(0, basis.size() - 1);
    std::vector<int> by_size(static_cast<size_t>(basis.size()));
    for (int i = 0; i < basis.size(); ++i) by_size[static_cast<size_t>(i)] = i;
    std::stable_sort(by_size.begin(), by_size.end(), [&](int a, int b) { return basis.ball(a).measure > basis.ball(b).measure; });
    for (int k = 0; k < count; ++k) {
        double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        auto idx = static_cast<size_t>(std::min<double>(basis.size() - 1, std::floor(std::pow(u, 3.0) * basis.size())));
        ids.push_back(by_size[idx]);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

}  // namespace

OscillationReport estimate_oscillation(const Operator& op, const SamplingOptions& opt) {
    if (opt.n_samples < 1) throw std::invalid_argument("estimate_oscillation needs n_samples >= 1");
    const BallBasis& basis = op.basis();
    struct Partial {
        double c1 = 0.0, c2 = 0.0;
        int skipped = 0, ball = -1, x = -1, xp = -1;
    };
    std::vector<Partial> parts(static_cast<size_t>(opt.n_samples));
    parallel_for(opt.n_samples, opt.threads, [&](int s) {
        Partial& p = parts[static_cast<size_t>(s)];
        auto fs = sample_inputs(op, opt.seed, static_cast<std::uint64_t>(s), false);
        std::mt19937_64 rng(derive_seed(opt.seed ^ 0x5eedULL, static_cast<std::uint64_t>(s)));
        for (int b : sample_balls(basis, rng, opt.max_balls)) {
            double den2 = prod_average(basis, fs, b, op.r(), true);
            if (den2 > 0.0) {
                double v = op.tail_oscillation(fs, b) / den2;
                if (v > p.c2) {
                    p.c2 = v;
                    p.ball = b;
                }
            } else {
                ++p.skipped;
            }
            int h = basis.hull[static_cast<size_t>(b)];
            if (h == basis.root || basis.saturated[static_cast<size_t>(b)]) continue;
            int big = expansion_ball(op, b);
            if (big < 0) continue;
            int bigh = basis.hull[static_cast<size_t>(big)];
            double den1 = prod_average(basis, fs, bigh, op.r(), false);
            if (!(den1 > 0.0)) {
                ++p.skipped;
                continue;
            }
            GridFunction gap = op.truncation_gap(fs, bigh, h, b, 64);
            double g = *std::max_element(gap.begin(), gap.end());
            p.c1 = std::max(p.c1, g / den1);
        }
    });
    OscillationReport rep;
    rep.samples = opt.n_samples;
    for (size_t s = 0; s < parts.size(); ++s) {
        rep.c1_est = std::max(rep.c1_est, parts[s].c1);
        rep.skipped += parts[s].skipped;
        if (parts[s].c2 > rep.c2_est) {
            rep.c2_est = parts[s].c2;
            rep.worst_ball = parts[s].ball;
            rep.worst_sample = s;
        }
    }
    return rep;
}

double estimate_weak_norm(const Operator& op, const SamplingOptions& opt) {
    std::vector<double> vals(static_cast<size_t>(opt.n_samples), 0.0);
    parallel_for(opt.n_samples, opt.threads, [&](int s) {
        auto fs = sample_inputs(op, opt.seed ^ 0x3a7ULL, static_cast<std::uint64_t>(s), true);
        GridFunction t = op.apply(fs);
        vals[static_cast<size_t>(s)] = weak_norm(t, op.r() / op.arity(), op.basis().space.masses);
    });
    return vals.empty() ? 0.0 : *std::max_element(vals.begin(), vals.end());
}

double delta(const Operator& op, int A, int B, const SamplingOptions& opt, const std::vector<std::vector<GridFunction>>* extra) {
    if (!op.basis().ball(B).contains(op.basis().ball(A))) throw std::invalid_argument("delta needs A inside B");
    if (A == B) return 0.0;
    const BallBasis& basis = op.basis();
    int ha = basis.hull[static_cast<size_t>(A)], hb = basis.hull[static_cast<size_t>(B)];
    auto one = [&](const std::vector<GridFunction>& fs) {
        double den = prod_average(basis, fs, hb, op.r(), false);
        if (!(den > 0.0)) return 0.0;
        GridFunction gap = op.truncation_gap(fs, hb, ha, A, 64);
        return *std::max_element(gap.begin(), gap.end()) / den;
    };
    std::vector<double> vals(static_cast<size_t>(opt.n_samples), 0.0);
    parallel_for(opt.n_samples, opt.threads, [&](int s) { vals[static_cast<size_t>(s)] = one(sample_inputs(op, opt.seed, static_cast<std::uint64_t>(s), false)); });
    double best = vals.empty() ? 0.0 : *std::max_element(vals.begin(), vals.end());
    if (extra)
        for (const auto& fs : *extra) best = std::max(best, one(fs));
    return best;
}

std::pair<double, double> delta_matched(const Operator& op, int A, int B, int C, const SamplingOptions& opt) {
    const BallBasis& basis = op.basis();
    const Ball& hb = basis.ball(basis.hull[static_cast<size_t>(B)]);
    std::vector<std::vector<GridFunction>> truncated;
    for (int s = 0; s < opt.n_samples; ++s) {
        auto fs = sample_inputs(op, opt.seed, static_cast<std::uint64_t>(s), false);
        for (auto& f : fs)
            for (int i = 0; i < static_cast<int>(f.size()); ++i)
                if (!hb.contains_atom(i, basis.space.shape[0])) f[static_cast<size_t>(i)] = 0.0;
        truncated.push_back(std::move(fs));
    }
    return {delta(op, A, B, opt), delta(op, A, C, opt, &truncated)};
}

OperatorConstants estimate_constants(const Operator& op, const SamplingOptions& opt) {
    OperatorConstants k;
    OscillationReport rep = estimate_oscillation(op, opt);
    k.c1 = rep.c1_est;
    k.c2 = rep.c2_est;
    k.weak_norm = estimate_weak_norm(op, opt);
    return k;
}

GridFunction gamma_majorant(const Operator& op, const std::vector<GridFunction>& fs, double cT, const std::vector<char>* where) {
    const BallBasis& basis = op.basis();
    GridFunction t = op.apply(fs, where);
    GridFunction ts = op.grand_maximal(fs, where);
    GridFunction mt = maximal_tensor(basis, fs, op.r());
    GridFunction out(t.size(), 0.0);
    for (size_t i = 0; i < out.size(); ++i) {
        if (where && !(*where)[i]) continue;
        out[i] = std::max({t[i], ts[i], cT * mt[i]});
    }
    return out;
}

}  // namespace sparselab
