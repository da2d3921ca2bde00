#include "sparselab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "parallel.hpp"
#include "sparselab/random.hpp"

namespace sparselab {

using detail::parallel_for;

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::vector<GridFunction> abs_all(std::vector<GridFunction> fs) {
    for (auto& f : fs)
        for (auto& v : f) v = std::abs(v);
    return fs;
}

double weighted_integral(const DiscreteSpace& sp, const GridFunction& g, const GridFunction& w, const std::vector<char>& mask) {
    double s = 0.0;
    for (size_t i = 0; i < g.size(); ++i)
        if (mask[i]) s += std::abs(g[i]) * w[i] * sp.masses[i];
    return s;
}

GridFunction majorant_for(const Operator& op, const std::vector<GridFunction>& fs, const CommutatorData* comm) {
    const BallBasis& basis = op.basis();
    if (comm == nullptr) return maximal_multi(basis, fs, op.r());
    std::vector<GridFunction> star;
    for (const auto& f : fs) star.push_back(iterated_maximal(basis, f, op.r()));
    return maximal_multi(basis, star, op.r());
}

GridFunction operator_value(const Operator& op, const std::vector<GridFunction>& fs, const CommutatorData* comm) {
    GridFunction t;
    if (comm == nullptr) {
        t = op.apply(fs);
    } else {
        CommutatorSpec cs{op.spec(), comm->symbols, comm->alpha};
        t = op.apply_commutator(cs, fs);
    }
    for (auto& v : t) v = std::abs(v);
    return t;
}

}  // namespace

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit needs at least two points");
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("linear_fit needs distinct abscissae");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

DecayFit fit_stretched_exponential(const std::vector<double>& t, const std::vector<double>& p) {
    if (t.size() != p.size()) throw std::invalid_argument("fit needs one P per t");
    std::vector<double> x, y;
    for (size_t i = 0; i < t.size(); ++i)
        if (t[i] > 0.0 && p[i] > 0.0 && p[i] < 1.0) {
            x.push_back(std::log(t[i]));
            y.push_back(std::log(-std::log(p[i])));
        }
    DecayFit fit;
    fit.points = static_cast<int>(x.size());
    if (x.size() < 2) return fit;
    LinearFit lf = linear_fit(x, y);
    fit.beta = lf.slope;
    fit.r2 = lf.r2;
    fit.gamma = fit.beta != 0.0 ? std::exp(lf.intercept / fit.beta) : 0.0;
    return fit;
}

GridFunction iterated_maximal(const BallBasis& basis, const GridFunction& f, double r) {
    GridFunction g(f.size());
    for (size_t i = 0; i < f.size(); ++i) g[i] = std::pow(std::abs(f[i]), r);
    const int k = static_cast<int>(std::ceil(r - 1e-12));
    for (int i = 0; i < k; ++i) g = maximal(basis, g, 1.0);
    for (auto& v : g) v = std::pow(v, 1.0 / r);
    return g;
}

GridFunction orlicz_maximal(const BallBasis& basis, const GridFunction& f, const OrliczSpec& phi) {
    std::vector<double> per_ball(basis.balls.size());
    for (const Ball& b : basis.balls) per_ball[static_cast<size_t>(b.id)] = luxemburg_norm(basis, f, b.id, phi);
    return sup_over_containing(basis, per_ball);
}

DecayCurve decay_experiment(const Operator& op, int ball, int trials, const std::vector<double>& t_grid, std::uint64_t seed,
                            const CommutatorData* comm, int threads) {
    if (trials < 1) throw std::invalid_argument("decay_experiment needs trials >= 1");
    for (size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("t grid must be increasing");
    const BallBasis& basis = op.basis();
    const auto& sp = basis.space;
    const Ball& B = basis.ball(ball);
    const int nx = sp.shape[0];
    struct Partial {
        std::vector<double> exceed;
        double counted = 0.0;
        long excluded = 0, atoms = 0;
    };
    std::vector<Partial> parts(static_cast<size_t>(trials));
    parallel_for(trials, threads, [&](int k) {
        Partial& part = parts[static_cast<size_t>(k)];
        part.exceed.assign(t_grid.size(), 0.0);
        std::vector<GridFunction> fs;
        for (int i = 0; i < op.arity(); ++i) {
            GridFunction f = restrict_to(basis, corpus_function(Recipe::mixed, sp, seed, static_cast<std::uint64_t>(k) * 16 + i), ball);
            bool any = std::any_of(f.begin(), f.end(), [](double v) { return v != 0.0; });
            if (!any) f[static_cast<size_t>(B.lo[1] * nx + B.lo[0])] = 1.0;
            fs.push_back(std::move(f));
        }
        GridFunction t = operator_value(op, fs, comm);
        GridFunction m = majorant_for(op, fs, comm);
        for (int i = 0; i < sp.size(); ++i) {
            if (!B.contains_atom(i, nx)) continue;
            double mi = m[static_cast<size_t>(i)];
            if (!(mi > 0.0)) {
                ++part.excluded;
                continue;
            }
            ++part.atoms;
            double mass = sp.masses[static_cast<size_t>(i)];
            part.counted += mass;
            double ratio = t[static_cast<size_t>(i)] / mi;
            for (size_t j = 0; j < t_grid.size() && ratio > t_grid[j]; ++j) part.exceed[j] += mass;
        }
    });
    DecayCurve c;
    c.t_grid = t_grid;
    c.trials = trials;
    c.p_of_t.assign(t_grid.size(), 0.0);
    double counted = 0.0;
    for (const auto& part : parts) {
        counted += part.counted;
        c.excluded_atoms += part.excluded;
        c.counted_atoms += part.atoms;
        for (size_t j = 0; j < t_grid.size(); ++j) c.p_of_t[j] += part.exceed[j];
    }
    for (auto& v : c.p_of_t) v = counted > 0.0 ? std::min(1.0, v / counted) : 0.0;
    c.fit = fit_stretched_exponential(c.t_grid, c.p_of_t);
    return c;
}

MixedWeakReport mixed_weak_experiment(const Operator& op, const WeightRecord& w, const WeightRecord& v, const std::vector<GridFunction>& fs,
                                      double cert_cap) {
    const BallBasis& basis = op.basis();
    const auto& sp = basis.space;
    const double e = op.r() / op.arity();
    WeightRecord ve(v.power(e));
    std::vector<double> sigma(static_cast<size_t>(sp.size()));
    for (size_t i = 0; i < sigma.size(); ++i) sigma[i] = w.w[i] * ve.w[i] * sp.masses[i];
    GridFunction t = operator_value(op, fs, nullptr), m = maximal_multi(basis, fs, op.r());
    for (size_t i = 0; i < t.size(); ++i) {
        t[i] /= v.w[i];
        m[i] /= v.w[i];
    }
    MixedWeakReport rep;
    rep.lhs = weak_norm(t, e, sigma);
    rep.rhs = weak_norm(m, e, sigma);
    rep.ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs : (rep.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    rep.w_a1 = ap_constant(w, 1.0, basis).constant;
    rep.v_ainf = ainf_constants(ve, basis).fujii;
    rep.certified = std::isfinite(rep.w_a1) && std::isfinite(rep.v_ainf) && rep.w_a1 <= cert_cap && rep.v_ainf <= cert_cap;
    return rep;
}

double coifman_fefferman(const Operator& op, const std::vector<GridFunction>& fs, const WeightRecord& w, double p, int b0,
                         const CommutatorData* comm) {
    if (!(p > 0.0)) throw std::invalid_argument("coifman_fefferman needs p > 0");
    const BallBasis& basis = op.basis();
    const auto& sp = basis.space;
    GridFunction t = operator_value(op, fs, comm);
    GridFunction m;
    if (comm == nullptr) {
        m = maximal_multi(basis, fs, op.r());
    } else {
        // tensor majorant, L(log L)^r maximal in the active slots
        m.assign(static_cast<size_t>(sp.size()), 1.0);
        for (size_t i = 0; i < fs.size(); ++i) {
            GridFunction g = comm->alpha[i] > 0 ? orlicz_maximal(basis, fs[i], OrliczSpec::llogl(op.r())) : maximal(basis, fs[i], op.r());
            for (size_t a = 0; a < m.size(); ++a) m[a] *= g[a];
        }
    }
    double numv, denv;
    if (b0 < 0) {
        numv = lp_norm(sp, t, p, &w.w);
        denv = lp_norm(sp, m, p, &w.w);
    } else {
        numv = weighted_integral(sp, t, w.w, ball_mask(basis, b0));
        denv = weighted_integral(sp, m, w.w, ball_mask(basis, hull_power(basis, b0, 3)));
    }
    if (denv > 0.0) return numv / denv;
    return numv > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

double weighted_maximal_norm(const WeightRecord& u, double q, const BallBasis& basis, int trials, std::uint64_t seed) {
    const auto& sp = basis.space;
    double best = 0.0;
    auto try_f = [&](const GridFunction& f) {
        double den = lp_norm(sp, f, q, &u.w);
        if (!(den > 0.0)) return;
        best = std::max(best, lp_norm(sp, weighted_maximal(f, u, basis), q, &u.w) / den);
    };
    std::vector<int> order(static_cast<size_t>(basis.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return basis.ball(a).measure > basis.ball(b).measure; });
    const int nb = std::min(basis.size(), 32);
    for (int k = 0; k < nb; ++k) {
        size_t idx = static_cast<size_t>(static_cast<long>(k) * (basis.size() - 1) / std::max(1, nb - 1));
        const auto mask = ball_mask(basis, order[idx]);
        GridFunction f(mask.begin(), mask.end());
        try_f(f);
    }
    for (int s = 0; s < trials; ++s) {
        GridFunction f = corpus_function(Recipe::mixed, sp, seed, static_cast<std::uint64_t>(s));
        for (auto& v : f) v = std::abs(v);
        try_f(f);
    }
    return best;
}

NFactors n_factors(const MultiWeight& mw, const BallBasis& basis, int trials, std::uint64_t seed) {
    const int m = mw.m();
    const double p = mw.p_total();
    std::vector<WeightRecord> sig;
    for (int i = 0; i < m; ++i) {
        if (mw.r[static_cast<size_t>(i)] >= mw.p[static_cast<size_t>(i)]) throw std::invalid_argument("n_factors needs r_i < p_i");
        sig.push_back(mw.sigma(i));
    }
    NFactors out;
    WeightRecord w = mw.product();
    const double pprime = p > 1.0 ? p / (p - 1.0) : 0.0;
    if (p > 1.0) out.w_factor = weighted_maximal_norm(w, pprime, basis, trials, seed);
    for (int i = 0; i < m; ++i) {
        double q = mw.p[static_cast<size_t>(i)] / mw.r[static_cast<size_t>(i)];
        out.sigma_part *= std::pow(weighted_maximal_norm(sig[static_cast<size_t>(i)], q, basis, trials, seed + 1 + i), 1.0 / mw.r[static_cast<size_t>(i)]);
    }
    out.n1 = out.w_factor * out.sigma_part;
    // auxiliary exponents at the midpoints of their admissible ranges
    const double s = p > 1.0 ? 0.5 * (1.0 + pprime) : 1.0;
    const double wf2 = p > 1.0 ? std::pow(weighted_maximal_norm(w, pprime / s, basis, trials, seed + 101), 1.0 / s) : 1.0;
    std::vector<double> sj_part(static_cast<size_t>(m));
    for (int j = 0; j < m; ++j) {
        double pj = mw.p[static_cast<size_t>(j)], rj = mw.r[static_cast<size_t>(j)];
        double sj = 0.5 * (1.0 + pj / rj);
        sj_part[static_cast<size_t>(j)] = std::pow(weighted_maximal_norm(sig[static_cast<size_t>(j)], pj / (rj * sj), basis, trials, seed + 201 + j), 1.0 / (rj * sj));
    }
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        std::vector<int> tau;
        double v = wf2;
        for (int j = 0; j < m; ++j)
            if ((mask >> j) & 1u) {
                tau.push_back(j);
                v *= sj_part[static_cast<size_t>(j)];
            }
        out.n2[tau] = v;
    }
    return out;
}

GridFunction shell_power_weight(const BallBasis& refined, double a) {
    const int L = refined.depth;
    const int n = refined.space.size();
    if (n != L + 1) throw std::invalid_argument("shell_power_weight needs a refined dyadic basis");
    GridFunction w(static_cast<size_t>(n));
    const double shape = std::abs(a + 1.0) < 1e-12 ? 2.0 * std::log(2.0) : (1.0 - std::exp2(-(a + 1.0))) / ((a + 1.0) / 2.0);
    for (int j = 1; j <= L; ++j) w[static_cast<size_t>(j)] = std::exp2(-static_cast<double>(L - j) * a) * shape;
    w[0] = w[1] * std::exp2(-a);
    return w;
}

SharpnessScan sharpness_scan(const MultiOperator& op, int m, double r, const WeightFamily& family, const std::vector<double>& params,
                             const BallBasis& basis, const ScanOptions& opt) {
    if (params.size() < 4) throw std::invalid_argument("sharpness scan needs at least 4 family points");
    const auto& sp = basis.space;
    const size_t P = params.size();
    SharpnessScan sc;
    sc.params = params;
    sc.characteristic.assign(P, 0.0);
    sc.classical.assign(P, 0.0);
    sc.norm_estimates.assign(P, 0.0);
    sc.normalized.assign(P, 0.0);
    sc.n1.assign(P, 0.0);
    {
        MultiWeight mw0 = family(params[0]);
        if (mw0.m() != m) throw std::invalid_argument("weight family arity differs from the operator");
        double p = mw0.p_total();
        sc.target_exponent = p;
        for (int i = 0; i < m; ++i) {
            double q = mw0.p[static_cast<size_t>(i)] / r;
            sc.target_exponent = std::max(sc.target_exponent, q / (q - 1.0));
        }
        if (m == 1) sc.buckley_exponent = 1.0 / (mw0.p[0] / r - 1.0);
    }
    parallel_for(static_cast<int>(P), opt.threads, [&](int k) {
        auto ks = static_cast<size_t>(k);
        MultiWeight mw = family(params[ks]);
        const double p = mw.p_total();
        WeightRecord w = mw.product();
        sc.characteristic[ks] = multilinear_ap_constant(mw, basis);
        if (m == 1) sc.classical[ks] = ap_constant(mw.components[0], mw.p[0] / r, basis).constant;
        std::vector<GridFunction> sig;
        for (int i = 0; i < m; ++i)
            sig.push_back(mw.r[static_cast<size_t>(i)] < mw.p[static_cast<size_t>(i)] ? mw.sigma(i).w : GridFunction(static_cast<size_t>(sp.size()), 1.0));
        double best = 0.0;
        auto try_fs = [&](const std::vector<GridFunction>& fs) {
            double den = 1.0;
            for (int i = 0; i < m; ++i) den *= lp_norm(sp, fs[static_cast<size_t>(i)], mw.p[static_cast<size_t>(i)], &mw.components[static_cast<size_t>(i)].w);
            if (!(den > 0.0)) return;
            best = std::max(best, lp_norm(sp, op(fs), p, &w.w) / den);
        };
        // dual-weight indicators on the balls around the most singular atom
        int hot = static_cast<int>(std::max_element(sig[0].begin(), sig[0].end()) - sig[0].begin());
        std::vector<int> around = basis.containing(hot);
        if (around.size() > 64) {
            std::vector<int> pick;
            for (size_t k = 0; k < 64; ++k) pick.push_back(around[k * (around.size() - 1) / 63]);
            around = pick;
        }
        for (int id : around) {
            std::vector<GridFunction> a, b;
            const auto mask = ball_mask(basis, id);
            for (int i = 0; i < m; ++i) {
                GridFunction fa(static_cast<size_t>(sp.size()), 0.0), fb(static_cast<size_t>(sp.size()), 0.0);
                for (size_t x = 0; x < fa.size(); ++x)
                    if (mask[x]) {
                        fa[x] = sig[static_cast<size_t>(i)][x];
                        fb[x] = 1.0;
                    }
                a.push_back(std::move(fa));
                b.push_back(std::move(fb));
            }
            try_fs(a);
            try_fs(b);
        }
        for (int s = 0; s < opt.trials; ++s) {
            std::vector<GridFunction> fs;
            for (int i = 0; i < m; ++i) fs.push_back(corpus_function(Recipe::mixed, sp, opt.seed, static_cast<std::uint64_t>(s) * 16 + i));
            try_fs(abs_all(std::move(fs)));
        }
        sc.norm_estimates[ks] = best;
        sc.normalized[ks] = best / std::pow(sc.characteristic[ks], sc.target_exponent);
        if (opt.with_n_factors) sc.n1[ks] = n_factors(mw, basis, opt.trials, opt.seed).n1;
    });
    std::vector<double> lx, ly, lc;
    for (size_t k = 0; k < P; ++k) {
        if (k > 0 && !(sc.characteristic[k] > sc.characteristic[k - 1])) throw std::invalid_argument("characteristic must increase along the scan");
        lx.push_back(std::log(sc.characteristic[k]));
        ly.push_back(std::log(sc.norm_estimates[k]));
        if (m == 1) lc.push_back(std::log(sc.classical[k]));
    }
    sc.slope = linear_fit(lx, ly).slope;
    if (m == 1) sc.classical_slope = linear_fit(lc, ly).slope;
    sc.normalized_max = *std::max_element(sc.normalized.begin(), sc.normalized.end());
    return sc;
}

FKReport fk_probe(const DiscreteSpace& space, const std::vector<GridFunction>& family, double p, const WeightRecord& w, int x0_atom,
                  const std::vector<double>& a_grid, const std::vector<double>& r_grid, double p0) {
    if (family.empty()) throw std::invalid_argument("fk_probe needs a nonempty family");
    if (!(p > 0.0)) throw std::invalid_argument("fk_probe needs p > 0");
    if (p <= 1.0 && !(p0 > 1.0)) throw std::invalid_argument("fk_probe needs p0 > 1 when p <= 1");
    FKReport rep;
    rep.a_grid = a_grid;
    rep.r_grid = r_grid;
    rep.p0 = p0;
    const int n = space.size();
    const double c0 = space.coord(x0_atom);
    for (const auto& f : family) rep.bound_sup = std::max(rep.bound_sup, lp_norm(space, f, p, &w.w));
    for (double A : a_grid) {
        double worst = 0.0;
        for (const auto& f : family) {
            GridFunction g(f.size(), 0.0);
            for (int i = 0; i < n; ++i)
                if (std::abs(space.coord(i) - c0) > A) g[static_cast<size_t>(i)] = f[static_cast<size_t>(i)];
            worst = std::max(worst, lp_norm(space, g, p, &w.w));
        }
        rep.tail_curve.push_back(worst);
    }
    for (double rad : r_grid) {
        double worst = 0.0;
        for (const auto& f : family) {
            double v;
            if (p > 1.0) {
                GridFunction avg = ball_average_function(space, f, rad);
                GridFunction d(f.size());
                for (size_t i = 0; i < f.size(); ++i) d[i] = f[i] - avg[i];
                v = lp_norm(space, d, p, &w.w);
            } else {
                const int k = static_cast<int>(std::floor(rad / space.cell + 1e-9));
                const double q = p / p0;
                double s = 0.0;
                for (int x = 0; x < n; ++x) {
                    double numr = 0.0, den = 0.0;
                    for (int y = std::max(0, x - k); y <= std::min(n - 1, x + k); ++y) {
                        numr += std::pow(std::abs(f[static_cast<size_t>(x)] - f[static_cast<size_t>(y)]), q) * space.masses[static_cast<size_t>(y)];
                        den += space.masses[static_cast<size_t>(y)];
                    }
                    s += std::pow(numr / den, p0) * w.w[static_cast<size_t>(x)] * space.masses[static_cast<size_t>(x)];
                }
                v = std::pow(s, 1.0 / p);
            }
            worst = std::max(worst, v);
        }
        rep.osc_curve.push_back(worst);
    }
    return rep;
}

std::string to_csv(const DecayCurve& c) {
    std::ostringstream os;
    os << "t,P,trials\n";
    for (size_t i = 0; i < c.t_grid.size(); ++i) os << num(c.t_grid[i]) << ',' << num(c.p_of_t[i]) << ',' << c.trials << '\n';
    os << "# fit gamma=" << num(c.fit.gamma) << " beta=" << num(c.fit.beta) << " r2=" << num(c.fit.r2) << " points=" << c.fit.points
       << " excluded_atoms=" << c.excluded_atoms << '\n';
    return os.str();
}

std::string to_csv(const SharpnessScan& s) {
    std::ostringstream os;
    os << "param,characteristic,classical,norm_lower_bound,normalized,n1\n";
    for (size_t i = 0; i < s.params.size(); ++i)
        os << num(s.params[i]) << ',' << num(s.characteristic[i]) << ',' << num(s.classical[i]) << ',' << num(s.norm_estimates[i]) << ','
           << num(s.normalized[i]) << ',' << num(s.n1[i]) << '\n';
    os << "# slope=" << num(s.slope) << " classical_slope=" << num(s.classical_slope) << " target_exponent=" << num(s.target_exponent)
       << " buckley_exponent=" << num(s.buckley_exponent) << " normalized_max=" << num(s.normalized_max) << '\n';
    return os.str();
}

std::string to_csv(const FKReport& r) {
    std::ostringstream os;
    os << "curve,x,value\n";
    for (size_t i = 0; i < r.a_grid.size(); ++i) os << "tail," << num(r.a_grid[i]) << ',' << num(r.tail_curve[i]) << '\n';
    for (size_t i = 0; i < r.r_grid.size(); ++i) os << "osc," << num(r.r_grid[i]) << ',' << num(r.osc_curve[i]) << '\n';
    os << "# bound_sup=" << num(r.bound_sup) << " p0=" << num(r.p0) << '\n';
    return os.str();
}

}  // namespace sparselab
