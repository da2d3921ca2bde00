#include "sparselab/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sparselab {

WeightRecord::WeightRecord(GridFunction values) : w(std::move(values)) {
    for (double v : w)
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("weight entries must be strictly positive and finite");
}

GridFunction WeightRecord::power(double e) const {
    GridFunction out(w.size());
    for (size_t i = 0; i < w.size(); ++i) out[i] = std::pow(w[i], e);
    return out;
}

namespace {

double avg(const Integrator& in, const Ball& b) { return in.over(b) / b.measure; }

// per-ball min and max of g via atom loops; cheap enough for the desk-scale bases
void ball_extrema(const BallBasis& basis, const GridFunction& g, std::vector<double>& mn, std::vector<double>& mx) {
    mn.assign(basis.balls.size(), std::numeric_limits<double>::infinity());
    mx.assign(basis.balls.size(), -std::numeric_limits<double>::infinity());
    const int nx = basis.space.shape[0];
    if (basis.tree_structured()) {
        // children before parents
        for (auto it = basis.topdown.rbegin(); it != basis.topdown.rend(); ++it) {
            const Ball& b = basis.ball(*it);
            auto k = static_cast<size_t>(*it);
            if (mn[k] == std::numeric_limits<double>::infinity()) {
                for (int x = b.lo[0]; x < b.hi[0]; ++x) {
                    mn[k] = std::min(mn[k], g[static_cast<size_t>(x)]);
                    mx[k] = std::max(mx[k], g[static_cast<size_t>(x)]);
                }
            }
            int p = basis.parent[k];
            if (p >= 0) {
                mn[static_cast<size_t>(p)] = std::min(mn[static_cast<size_t>(p)], mn[k]);
                mx[static_cast<size_t>(p)] = std::max(mx[static_cast<size_t>(p)], mx[k]);
            }
        }
        return;
    }
    for (const Ball& b : basis.balls) {
        auto k = static_cast<size_t>(b.id);
        for (int y = b.lo[1]; y < b.hi[1]; ++y)
            for (int x = b.lo[0]; x < b.hi[0]; ++x) {
                double v = g[static_cast<size_t>(y * nx + x)];
                mn[k] = std::min(mn[k], v);
                mx[k] = std::max(mx[k], v);
            }
    }
}

}  // namespace

MuckenhouptReport ap_constant(const WeightRecord& w, double p, const BallBasis& basis) {
    if (!(p >= 1.0)) throw std::invalid_argument("ap_constant needs p >= 1");
    MuckenhouptReport rep;
    rep.p = p;
    rep.constant = 0.0;
    Integrator iw(basis.space, w.w);
    if (p == 1.0) {
        std::vector<double> per_ball(basis.balls.size());
        for (const Ball& b : basis.balls) per_ball[static_cast<size_t>(b.id)] = avg(iw, b);
        GridFunction mw = sup_over_containing(basis, per_ball);
        int worst = 0;
        for (size_t i = 0; i < mw.size(); ++i) {
            double r = mw[i] / w.w[i];
            if (r > rep.constant) {
                rep.constant = r;
                worst = static_cast<int>(i);
            }
        }
        for (const Ball& b : basis.balls)
            if (b.contains_atom(worst, basis.space.shape[0]) && per_ball[static_cast<size_t>(b.id)] == mw[static_cast<size_t>(worst)]) {
                rep.extremal_ball = b.id;
                break;
            }
        return rep;
    }
    double pp = p / (p - 1.0);
    Integrator is(basis.space, w.power(1.0 - pp));
    for (const Ball& b : basis.balls) {
        double v = avg(iw, b) * std::pow(avg(is, b), p - 1.0);
        if (v > rep.constant) {
            rep.constant = v;
            rep.extremal_ball = b.id;
        }
    }
    return rep;
}

double rh_constant(const WeightRecord& w, double s, const BallBasis& basis) {
    if (!(s > 1.0)) throw std::invalid_argument("rh_constant needs s > 1");
    Integrator iw(basis.space, w.w);
    double best = 0.0;
    if (std::isinf(s)) {
        std::vector<double> mn, mx;
        ball_extrema(basis, w.w, mn, mx);
        for (const Ball& b : basis.balls) best = std::max(best, mx[static_cast<size_t>(b.id)] / avg(iw, b));
        return best;
    }
    Integrator is(basis.space, w.power(s));
    for (const Ball& b : basis.balls) best = std::max(best, std::pow(avg(is, b), 1.0 / s) / avg(iw, b));
    return best;
}

AinfConstants ainf_constants(const WeightRecord& w, const BallBasis& basis) {
    AinfConstants out;
    Integrator iw(basis.space, w.w);
    GridFunction lg(w.w.size());
    for (size_t i = 0; i < lg.size(); ++i) lg[i] = -std::log(w.w[i]);
    Integrator il(basis.space, lg);
    out.exp_log = 0.0;
    for (const Ball& b : basis.balls) out.exp_log = std::max(out.exp_log, avg(iw, b) * std::exp(avg(il, b)));

    out.fujii = 0.0;
    const auto& mu = basis.space.masses;
    if (basis.tree_structured()) {
        std::vector<double> a(basis.balls.size());
        for (const Ball& b : basis.balls) a[static_cast<size_t>(b.id)] = avg(iw, b);
        for (const Ball& b : basis.balls) {
            int h = basis.hull[static_cast<size_t>(b.id)];
            double s = 0.0;
            for (int x = b.lo[0]; x < b.hi[0]; ++x) {
                double m = 0.0;
                for (int v = basis.leaf(x);; v = basis.parent[static_cast<size_t>(v)]) {
                    m = std::max(m, a[static_cast<size_t>(v)]);
                    if (v == h || basis.parent[static_cast<size_t>(v)] < 0) break;
                }
                s += m * mu[static_cast<size_t>(x)];
            }
            out.fujii = std::max(out.fujii, s / iw.over(basis.ball(h)));
        }
        return out;
    }
    if (basis.balls.size() > 20000) throw std::invalid_argument("fujii constant: basis too large for the generic sweep");
    std::vector<double> per_ball(basis.balls.size());
    for (const Ball& b : basis.balls) {
        const Ball& h = basis.ball(basis.hull[static_cast<size_t>(b.id)]);
        for (const Ball& c : basis.balls) {
            Ball x = c;
            for (int d = 0; d < 2; ++d) {
                x.lo[static_cast<size_t>(d)] = std::max(c.lo[static_cast<size_t>(d)], h.lo[static_cast<size_t>(d)]);
                x.hi[static_cast<size_t>(d)] = std::min(c.hi[static_cast<size_t>(d)], h.hi[static_cast<size_t>(d)]);
            }
            bool empty = x.lo[0] >= x.hi[0] || x.lo[1] >= x.hi[1];
            per_ball[static_cast<size_t>(c.id)] = empty ? 0.0 : iw.over(x) / c.measure;
        }
        GridFunction m = sup_over_containing(basis, per_ball);
        Integrator im(basis.space, m);
        out.fujii = std::max(out.fujii, im.over(b) / iw.over(h));
    }
    return out;
}

MultiWeight::MultiWeight(std::vector<WeightRecord> ws, std::vector<double> ps, std::vector<double> rs)
    : components(std::move(ws)), p(std::move(ps)), r(std::move(rs)) {
    if (components.empty() || components.size() != p.size()) throw std::invalid_argument("MultiWeight: one exponent per component");
    if (r.empty()) r.assign(p.size(), 1.0);
    if (r.size() != p.size()) throw std::invalid_argument("MultiWeight: one reduction per component");
    for (size_t i = 0; i < p.size(); ++i) {
        if (!(r[i] >= 1.0) || !(p[i] >= r[i])) throw std::invalid_argument("MultiWeight: need 1 <= r_i <= p_i");
        if (components[i].w.size() != components[0].w.size()) throw std::invalid_argument("MultiWeight: component length mismatch");
    }
}

double MultiWeight::p_total() const {
    double inv = 0.0;
    for (double q : p) inv += 1.0 / q;
    return 1.0 / inv;
}

WeightRecord MultiWeight::product() const {
    double pt = p_total();
    GridFunction out(components[0].w.size(), 1.0);
    for (size_t i = 0; i < components.size(); ++i)
        for (size_t a = 0; a < out.size(); ++a) out[a] *= std::pow(components[i].w[a], pt / p[i]);
    return WeightRecord(out);
}

WeightRecord MultiWeight::sigma(int i) const {
    auto k = static_cast<size_t>(i);
    if (r[k] == p[k]) throw std::invalid_argument("MultiWeight: sigma undefined when r_i = p_i");
    return WeightRecord(components[k].power(r[k] / (r[k] - p[k])));
}

double multilinear_ap_constant(const MultiWeight& mw, const BallBasis& basis) {
    double pt = mw.p_total();
    Integrator iw(basis.space, mw.product().w);
    std::vector<Integrator> sig;
    std::vector<std::vector<double>> mins(static_cast<size_t>(mw.m()));
    sig.reserve(static_cast<size_t>(mw.m()));
    for (int i = 0; i < mw.m(); ++i) {
        auto k = static_cast<size_t>(i);
        if (mw.r[k] == mw.p[k]) {
            std::vector<double> mx;
            ball_extrema(basis, mw.components[k].w, mins[k], mx);
            sig.emplace_back(basis.space, std::vector<double>(mw.components[k].w.size(), 0.0));
        } else {
            sig.emplace_back(basis.space, mw.sigma(i).w);
        }
    }
    double best = 0.0;
    for (const Ball& b : basis.balls) {
        double v = std::pow(avg(iw, b), 1.0 / pt);
        for (int i = 0; i < mw.m(); ++i) {
            auto k = static_cast<size_t>(i);
            if (mw.r[k] == mw.p[k])
                v *= std::pow(mins[k][static_cast<size_t>(b.id)], -1.0 / mw.p[k]);
            else
                v *= std::pow(avg(sig[k], b), 1.0 / mw.r[k] - 1.0 / mw.p[k]);
        }
        best = std::max(best, v);
    }
    return best;
}

CoifmanRochbergResult coifman_rochberg(const std::vector<GridFunction>& fs, double delta, const BallBasis& basis) {
    double m = static_cast<double>(fs.size());
    if (!(delta > 0.0) || !(delta < 1.0 / m)) throw std::invalid_argument("coifman_rochberg needs 0 < delta < 1/m");
    GridFunction mf = maximal_multi(basis, fs, 1.0);
    CoifmanRochbergResult out;
    GridFunction w(mf.size());
    for (size_t i = 0; i < mf.size(); ++i) {
        if (mf[i] <= 0.0) out.excluded_atoms.push_back(static_cast<int>(i));
        w[i] = std::pow(mf[i], delta);
    }
    if (!out.excluded_atoms.empty()) {
        out.constant = std::numeric_limits<double>::infinity();
        return out;
    }
    out.constant = ap_constant(WeightRecord(w), 1.0, basis).constant;
    return out;
}

GridFunction weighted_maximal(const GridFunction& f, const WeightRecord& w, const BallBasis& basis) {
    GridFunction fw(f.size());
    for (size_t i = 0; i < f.size(); ++i) fw[i] = std::abs(f[i]) * w.w[i];
    Integrator inum(basis.space, fw), iden(basis.space, w.w);
    std::vector<double> per_ball(basis.balls.size());
    for (const Ball& b : basis.balls) per_ball[static_cast<size_t>(b.id)] = inum.over(b) / iden.over(b);
    return sup_over_containing(basis, per_ball);
}

RdFResult rubio_de_francia(const GridFunction& h, double s, const BallBasis& basis, double tail_tol) {
    if (!(s > 1.0)) throw std::invalid_argument("rubio_de_francia needs s > 1");
    double hmax = 0.0;
    for (double v : h) {
        if (v < 0.0) throw std::invalid_argument("rubio_de_francia needs h >= 0");
        hmax = std::max(hmax, v);
    }
    if (hmax == 0.0) throw std::invalid_argument("rubio_de_francia needs h not identically 0");
    RdFResult out;
    out.m_norm = std::pow(verify_axioms(basis).effective_c0, 1.0 / s);
    out.rh = h;
    GridFunction term = h;
    double scale = 1.0 / (2.0 * out.m_norm);
    for (out.terms = 1; out.terms < 10000; ++out.terms) {
        term = maximal(basis, term, 1.0);
        double tmax = 0.0;
        for (double& v : term) {
            v *= scale;
            tmax = std::max(tmax, v);
        }
        double rmin = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < term.size(); ++i) {
            out.rh[i] += term[i];
            rmin = std::min(rmin, out.rh[i]);
        }
        // relative to the smallest value of Rh so the dropped tail cannot tip the A1 ratio
        if (tmax < tail_tol * (rmin > 0.0 ? rmin : 1.0)) break;
    }
    for (size_t i = 0; i < h.size(); ++i)
        if (!(h[i] <= out.rh[i])) out.dominates = false;
    out.norm_ratio = lp_norm(basis.space, out.rh, s) / lp_norm(basis.space, h, s);
    out.a1_constant = ap_constant(WeightRecord(out.rh), 1.0, basis).constant;
    const double slack = 1e-12;
    if (!out.dominates) out.defect += "h <= Rh violated; ";
    if (out.norm_ratio > 2.0 * (1.0 + slack)) out.defect += "||Rh||_s <= 2||h||_s violated; ";
    if (out.a1_constant > 2.0 * out.m_norm * (1.0 + slack)) out.defect += "[Rh]_A1 <= 2||M|| violated; ";
    out.pass = out.defect.empty();
    return out;
}

GridFunction sawyer_S(const GridFunction& f, const WeightRecord& w, const BallBasis& basis) {
    GridFunction fw(f.size());
    for (size_t i = 0; i < f.size(); ++i) fw[i] = f[i] * w.w[i];
    GridFunction m = maximal(basis, fw, 1.0);
    for (size_t i = 0; i < m.size(); ++i) m[i] /= w.w[i];
    return m;
}

SawyerRResult sawyer_R(const GridFunction& h, const WeightRecord& w, double K, const BallBasis& basis, double tail_tol) {
    if (!(K > 0.0)) throw std::invalid_argument("sawyer_R needs K > 0");
    SawyerRResult out;
    out.rh = h;
    GridFunction term = h;
    for (out.terms = 1; out.terms < 10000; ++out.terms) {
        term = sawyer_S(term, w, basis);
        double tmax = 0.0;
        for (double& v : term) {
            v /= 2.0 * K;
            tmax = std::max(tmax, v);
        }
        double rmin = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < term.size(); ++i) {
            out.rh[i] += term[i];
            rmin = std::min(rmin, out.rh[i]);
        }
        if (tmax < tail_tol * (rmin > 0.0 ? rmin : 1.0)) break;
    }
    GridFunction srh = sawyer_S(out.rh, w, basis);
    for (size_t i = 0; i < srh.size(); ++i)
        if (out.rh[i] > 0.0) out.max_ratio = std::max(out.max_ratio, srh[i] / (2.0 * K * out.rh[i]));
    out.pass = out.max_ratio <= 1.0 + 1e-9;
    return out;
}

}  // namespace sparselab
