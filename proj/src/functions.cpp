#include "sparselab/functions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sparselab {

double VectorFunction::norm(int atom) const {
    const double* v = values.data() + static_cast<size_t>(atom) * n_index;
    double out = 0.0;
    switch (norm_tag) {
        case Norm::sup:
            for (int k = 0; k < n_index; ++k) out = std::max(out, std::abs(v[k]));
            return out;
        case Norm::l2:
            for (int k = 0; k < n_index; ++k) out += (l2_weights.empty() ? 1.0 : l2_weights[static_cast<size_t>(k)]) * v[k] * v[k];
            return std::sqrt(out);
        case Norm::sup_pairs:
            for (int k = 0; k + 1 < n_index; k += 2) out = std::max(out, std::hypot(v[k], v[k + 1]));
            return out;
    }
    return out;
}

double VectorFunction::distance(int atom, const VectorFunction& other, int other_atom) const {
    const double* a = values.data() + static_cast<size_t>(atom) * n_index;
    const double* b = other.values.data() + static_cast<size_t>(other_atom) * other.n_index;
    double out = 0.0;
    switch (norm_tag) {
        case Norm::sup:
            for (int k = 0; k < n_index; ++k) out = std::max(out, std::abs(a[k] - b[k]));
            return out;
        case Norm::l2:
            for (int k = 0; k < n_index; ++k) {
                double d = a[k] - b[k];
                out += (l2_weights.empty() ? 1.0 : l2_weights[static_cast<size_t>(k)]) * d * d;
            }
            return std::sqrt(out);
        case Norm::sup_pairs:
            for (int k = 0; k + 1 < n_index; k += 2) out = std::max(out, std::hypot(a[k] - b[k], a[k + 1] - b[k + 1]));
            return out;
    }
    return out;
}

GridFunction VectorFunction::norms() const {
    GridFunction out(static_cast<size_t>(n_atoms));
    for (int i = 0; i < n_atoms; ++i) out[static_cast<size_t>(i)] = norm(i);
    return out;
}

OrliczSpec OrliczSpec::power(double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("power Young function needs p >= 1");
    return {OrliczKind::power, p};
}
OrliczSpec OrliczSpec::llogl(double s) {
    if (!(s > 0.0)) throw std::invalid_argument("L log L exponent must be positive");
    return {OrliczKind::llogl, s};
}
OrliczSpec OrliczSpec::expl(double s) {
    if (!(s > 0.0)) throw std::invalid_argument("exp L exponent must be positive");
    return {OrliczKind::expl, s};
}

double OrliczSpec::phi(double t) const {
    switch (kind) {
        case OrliczKind::power: return std::pow(t, param);
        case OrliczKind::llogl: return t * std::pow(std::log(std::exp(1.0) + t), param);
        case OrliczKind::expl: return std::expm1(std::pow(t, param));
    }
    return 0.0;
}

Integrator::Integrator(const DiscreteSpace& space, const std::vector<double>& values) : dim_(space.dim) {
    if (static_cast<int>(values.size()) != space.size()) throw std::invalid_argument("function length does not match atom count");
    if (dim_ == 1) {
        p_.assign(values.size() + 1, 0.0);
        for (size_t i = 0; i < values.size(); ++i) p_[i + 1] = p_[i] + values[i] * space.masses[i];
    } else {
        int nx = space.shape[0], ny = space.shape[1];
        w_ = nx + 1;
        p_.assign(static_cast<size_t>(w_) * (ny + 1), 0.0);
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                size_t a = static_cast<size_t>(y * nx + x);
                p_[static_cast<size_t>((y + 1) * w_ + x + 1)] = values[a] * space.masses[a] + p_[static_cast<size_t>(y * w_ + x + 1)] +
                                                                 p_[static_cast<size_t>((y + 1) * w_ + x)] - p_[static_cast<size_t>(y * w_ + x)];
            }
    }
}

double Integrator::over(const Ball& b) const {
    if (dim_ == 1) return p_[static_cast<size_t>(b.hi[0])] - p_[static_cast<size_t>(b.lo[0])];
    auto at = [&](int x, int y) { return p_[static_cast<size_t>(y * w_ + x)]; };
    return at(b.hi[0], b.hi[1]) - at(b.lo[0], b.hi[1]) - at(b.hi[0], b.lo[1]) + at(b.lo[0], b.lo[1]);
}

double integral(const DiscreteSpace& space, const GridFunction& f) {
    double s = 0.0;
    for (size_t i = 0; i < f.size(); ++i) s += f[i] * space.masses[i];
    return s;
}

double lp_norm(const DiscreteSpace& space, const GridFunction& f, double p, const GridFunction* weight) {
    double s = 0.0;
    for (size_t i = 0; i < f.size(); ++i) s += std::pow(std::abs(f[i]), p) * space.masses[i] * (weight ? (*weight)[i] : 1.0);
    return std::pow(s, 1.0 / p);
}

namespace {

template <class Fn>
void for_atoms(const BallBasis& basis, const Ball& b, Fn&& fn) {
    const int nx = basis.space.shape[0];
    for (int y = b.lo[1]; y < b.hi[1]; ++y)
        for (int x = b.lo[0]; x < b.hi[0]; ++x) fn(y * nx + x);
}

double lux_average(const BallBasis& basis, const GridFunction& f, const Ball& b, const OrliczSpec& phi, double lambda, double shift) {
    double s = 0.0;
    for_atoms(basis, b, [&](int i) { s += phi.phi(std::abs(f[static_cast<size_t>(i)] - shift) / lambda) * basis.space.masses[static_cast<size_t>(i)]; });
    return s / b.measure;
}

double luxemburg_impl(const BallBasis& basis, const GridFunction& f, const Ball& b, const OrliczSpec& phi, double tol, double shift) {
    double top = 0.0;
    for_atoms(basis, b, [&](int i) { top = std::max(top, std::abs(f[static_cast<size_t>(i)] - shift)); });
    if (top == 0.0) return 0.0;
    if (phi.kind == OrliczKind::power) {
        double s = 0.0;
        for_atoms(basis, b, [&](int i) { s += std::pow(std::abs(f[static_cast<size_t>(i)] - shift), phi.param) * basis.space.masses[static_cast<size_t>(i)]; });
        return std::pow(s / b.measure, 1.0 / phi.param);
    }
    double hi = top;
    while (lux_average(basis, f, b, phi, hi, shift) > 1.0) hi *= 2.0;
    double lo = hi;
    while (lux_average(basis, f, b, phi, lo, shift) <= 1.0) lo *= 0.5;
    for (int it = 0; it < 200 && (hi - lo) > tol * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        if (lux_average(basis, f, b, phi, mid, shift) <= 1.0) hi = mid; else lo = mid;
    }
    return hi;
}

double plain_average(const BallBasis& basis, const GridFunction& f, const Ball& b) {
    double s = 0.0;
    for_atoms(basis, b, [&](int i) { s += f[static_cast<size_t>(i)] * basis.space.masses[static_cast<size_t>(i)]; });
    return s / b.measure;
}

}  // namespace

double ball_average(const BallBasis& basis, const GridFunction& f, int ball, double r) {
    const Ball& b = basis.ball(ball);
    double s = 0.0;
    for_atoms(basis, b, [&](int i) { s += std::pow(std::abs(f[static_cast<size_t>(i)]), r) * basis.space.masses[static_cast<size_t>(i)]; });
    return std::pow(s / b.measure, 1.0 / r);
}

double super_average(const BallBasis& basis, const GridFunction& f, int ball, double r) {
    const Ball& b = basis.ball(ball);
    std::vector<double> pw(f.size());
    for (size_t i = 0; i < f.size(); ++i) pw[i] = std::pow(std::abs(f[i]), r);
    Integrator in(basis.space, pw);
    double best = 0.0;
    if (basis.tree_structured()) {
        for (int v = ball; v >= 0; v = basis.parent[static_cast<size_t>(v)]) best = std::max(best, in.over(basis.ball(v)) / basis.ball(v).measure);
    } else {
        for (const Ball& c : basis.balls)
            if (c.contains(b)) best = std::max(best, in.over(c) / c.measure);
    }
    return std::pow(best, 1.0 / r);
}

double luxemburg_norm(const BallBasis& basis, const GridFunction& f, int ball, const OrliczSpec& phi, double tol) {
    return luxemburg_impl(basis, f, basis.ball(ball), phi, tol, 0.0);
}

double bmo_norm(const BallBasis& basis, const GridFunction& f) {
    double best = 0.0;
    for (const Ball& b : basis.balls) {
        double avg = plain_average(basis, f, b);
        double s = 0.0;
        for_atoms(basis, b, [&](int i) { s += std::abs(f[static_cast<size_t>(i)] - avg) * basis.space.masses[static_cast<size_t>(i)]; });
        best = std::max(best, s / b.measure);
    }
    return best;
}

double osc_expl_norm(const BallBasis& basis, const GridFunction& f, double s, double tol) {
    OrliczSpec phi = OrliczSpec::expl(s);
    double best = 0.0;
    for (const Ball& b : basis.balls) best = std::max(best, luxemburg_impl(basis, f, b, phi, tol, plain_average(basis, f, b)));
    return best;
}

double weak_norm(const GridFunction& g, double p, const std::vector<double>& sigma) {
    if (sigma.size() != g.size()) throw std::invalid_argument("weak_norm: measure length mismatch");
    if (!(p > 0.0)) throw std::invalid_argument("weak_norm: p must be positive");
    std::vector<size_t> order(g.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return std::abs(g[a]) > std::abs(g[b]); });
    double best = 0.0, acc = 0.0;
    for (size_t k = 0; k < order.size(); ++k) {
        acc += sigma[order[k]];
        double v = std::abs(g[order[k]]);
        bool last_of_level = k + 1 == order.size() || std::abs(g[order[k + 1]]) < v;
        if (last_of_level && v > 0.0) best = std::max(best, v * std::pow(acc, 1.0 / p));
    }
    return best;
}

GridFunction ball_average_function(const DiscreteSpace& space, const GridFunction& f, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
    if (space.dim != 1) throw std::invalid_argument("ball_average_function supports 1D spaces");
    const int n = space.size();
    Integrator in(space, f);
    const auto& pm = space.prefix();
    int k = static_cast<int>(std::floor(radius / space.cell + 1e-9));
    GridFunction out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        int lo = std::max(0, i - k), hi = std::min(n, i + k + 1);
        out[static_cast<size_t>(i)] = in.over(lo, hi) / (pm[static_cast<size_t>(hi)] - pm[static_cast<size_t>(lo)]);
    }
    return out;
}

GridFunction sup_over_containing(const BallBasis& basis, const std::vector<double>& per_ball) {
    const int n = basis.space.size();
    GridFunction out(static_cast<size_t>(n), -std::numeric_limits<double>::infinity());
    if (basis.tree_structured()) {
        std::vector<double> best(per_ball.size());
        for (int v : basis.topdown) {
            int p = basis.parent[static_cast<size_t>(v)];
            best[static_cast<size_t>(v)] = p < 0 ? per_ball[static_cast<size_t>(v)] : std::max(per_ball[static_cast<size_t>(v)], best[static_cast<size_t>(p)]);
        }
        for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = best[static_cast<size_t>(basis.leaf(i))];
        return out;
    }
    if (basis.space.dim == 1) {
        std::vector<int> order(per_ball.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return per_ball[static_cast<size_t>(a)] > per_ball[static_cast<size_t>(b)]; });
        std::vector<int> next(static_cast<size_t>(n + 1));
        std::iota(next.begin(), next.end(), 0);
        auto find = [&](int x) {
            int r = x;
            while (next[static_cast<size_t>(r)] != r) r = next[static_cast<size_t>(r)];
            while (next[static_cast<size_t>(x)] != r) {
                int t = next[static_cast<size_t>(x)];
                next[static_cast<size_t>(x)] = r;
                x = t;
            }
            return r;
        };
        int painted = 0;
        for (int id : order) {
            const Ball& b = basis.ball(id);
            for (int x = find(b.lo[0]); x < b.hi[0]; x = find(x)) {
                out[static_cast<size_t>(x)] = per_ball[static_cast<size_t>(id)];
                next[static_cast<size_t>(x)] = x + 1;
                ++painted;
            }
            if (painted == n) break;
        }
        return out;
    }
    for (const Ball& b : basis.balls)
        for_atoms(basis, b, [&](int i) { out[static_cast<size_t>(i)] = std::max(out[static_cast<size_t>(i)], per_ball[static_cast<size_t>(b.id)]); });
    return out;
}

GridFunction maximal(const BallBasis& basis, const GridFunction& f, double r) {
    return maximal_multi(basis, {f}, r);
}

GridFunction maximal_multi(const BallBasis& basis, const std::vector<GridFunction>& fs, double r) {
    if (fs.empty()) throw std::invalid_argument("maximal operator needs at least one function");
    std::vector<Integrator> ins;
    ins.reserve(fs.size());
    for (const auto& f : fs) {
        std::vector<double> pw(f.size());
        for (size_t i = 0; i < f.size(); ++i) pw[i] = r == 1.0 ? std::abs(f[i]) : std::pow(std::abs(f[i]), r);
        ins.emplace_back(basis.space, pw);
    }
    std::vector<double> per_ball(basis.balls.size());
    for (const Ball& b : basis.balls) {
        double prod = 1.0;
        for (const auto& in : ins) {
            double a = std::max(0.0, in.over(b)) / b.measure;
            prod *= r == 1.0 ? a : std::pow(a, 1.0 / r);
        }
        per_ball[static_cast<size_t>(b.id)] = prod;
    }
    return sup_over_containing(basis, per_ball);
}

GridFunction maximal_tensor(const BallBasis& basis, const std::vector<GridFunction>& fs, double r) {
    GridFunction out(static_cast<size_t>(basis.space.size()), 1.0);
    for (const auto& f : fs) {
        GridFunction m = maximal(basis, f, r);
        for (size_t i = 0; i < out.size(); ++i) out[i] *= m[i];
    }
    return out;
}

GridFunction maximal_restricted(const BallBasis& basis, const GridFunction& f, const std::vector<char>& support) {
    GridFunction g(f.size());
    for (size_t i = 0; i < f.size(); ++i) g[i] = support[i] ? f[i] : 0.0;
    return maximal(basis, g, 1.0);
}

std::vector<char> ball_mask(const BallBasis& basis, int ball) {
    std::vector<char> m(static_cast<size_t>(basis.space.size()), 0);
    for_atoms(basis, basis.ball(ball), [&](int i) { m[static_cast<size_t>(i)] = 1; });
    return m;
}

GridFunction restrict_to(const BallBasis& basis, const GridFunction& f, int ball) {
    GridFunction g(f.size(), 0.0);
    for_atoms(basis, basis.ball(ball), [&](int i) { g[static_cast<size_t>(i)] = f[static_cast<size_t>(i)]; });
    return g;
}

}  // namespace sparselab
