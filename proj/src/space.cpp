#include "sparselab/space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace sparselab {

namespace {

std::uint64_t box_key(const std::array<int, 2>& lo, const std::array<int, 2>& hi) {
    auto u = [](int v) { return static_cast<std::uint64_t>(static_cast<std::uint16_t>(v)); };
    return u(lo[0]) | (u(hi[0]) << 16) | (u(lo[1]) << 32) | (u(hi[1]) << 48);
}

Ball make_ball(const DiscreteSpace& s, std::array<int, 2> lo, std::array<int, 2> hi) {
    Ball b;
    b.lo = lo;
    b.hi = hi;
    const auto& p = s.prefix();
    if (s.dim == 1) {
        b.measure = p[static_cast<size_t>(hi[0])] - p[static_cast<size_t>(lo[0])];
    } else {
        int w = s.shape[0] + 1;
        auto at = [&](int x, int y) { return p[static_cast<size_t>(y * w + x)]; };
        b.measure = at(hi[0], hi[1]) - at(lo[0], hi[1]) - at(hi[0], lo[1]) + at(lo[0], lo[1]);
    }
    return b;
}

void check_masses(const std::vector<double>& masses) {
    for (double m : masses)
        if (!(m > 0.0) || !std::isfinite(m)) throw std::invalid_argument("atom masses must be positive and finite");
}

}  // namespace

std::string to_string(BasisKind k) {
    switch (k) {
        case BasisKind::dyadic_martingale: return "dyadic-martingale";
        case BasisKind::all_intervals: return "all-intervals";
        case BasisKind::rect2d_candidate: return "rect2d-candidate";
        case BasisKind::custom: return "custom";
    }
    return "custom";
}

BasisKind basis_kind_from_string(const std::string& s) {
    if (s == "dyadic-martingale" || s == "dyadic") return BasisKind::dyadic_martingale;
    if (s == "all-intervals" || s == "intervals") return BasisKind::all_intervals;
    if (s == "rect2d-candidate" || s == "rect2d") return BasisKind::rect2d_candidate;
    if (s == "custom") return BasisKind::custom;
    throw std::invalid_argument("unknown basis kind: " + s);
}

DiscreteSpace DiscreteSpace::line(std::vector<double> masses, double origin, double cell) {
    check_masses(masses);
    if (masses.empty()) throw std::invalid_argument("space needs at least one atom");
    DiscreteSpace s;
    s.dim = 1;
    s.shape = {static_cast<int>(masses.size()), 1};
    s.masses = std::move(masses);
    s.origin = origin;
    s.cell = cell > 0 ? cell : 1.0 / s.shape[0];
    s.rebuild();
    return s;
}

DiscreteSpace DiscreteSpace::uniform_line(int n, double origin, double length) {
    if (n < 1) throw std::invalid_argument("space needs at least one atom");
    return line(std::vector<double>(static_cast<size_t>(n), length / n), origin, length / n);
}

DiscreteSpace DiscreteSpace::lattice2d(int n) {
    if (n < 1) throw std::invalid_argument("lattice needs n >= 1");
    DiscreteSpace s;
    s.dim = 2;
    s.shape = {n, n};
    s.masses.assign(static_cast<size_t>(n) * n, 1.0 / (static_cast<double>(n) * n));
    s.cell = 1.0 / n;
    s.rebuild();
    return s;
}

void DiscreteSpace::rebuild() {
    total_mass = std::accumulate(masses.begin(), masses.end(), 0.0);
    if (dim == 1) {
        prefix_.assign(masses.size() + 1, 0.0);
        for (size_t i = 0; i < masses.size(); ++i) prefix_[i + 1] = prefix_[i] + masses[i];
    } else {
        int nx = shape[0], ny = shape[1], w = nx + 1;
        prefix_.assign(static_cast<size_t>(w) * (ny + 1), 0.0);
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                prefix_[static_cast<size_t>((y + 1) * w + x + 1)] =
                    masses[static_cast<size_t>(y * nx + x)] + prefix_[static_cast<size_t>(y * w + x + 1)] +
                    prefix_[static_cast<size_t>((y + 1) * w + x)] - prefix_[static_cast<size_t>(y * w + x)];
    }
}

double BallBasis::measure(const std::array<int, 2>& lo, const std::array<int, 2>& hi) const {
    return make_ball(space, lo, hi).measure;
}

int BallBasis::find(const std::array<int, 2>& lo, const std::array<int, 2>& hi) const {
    auto it = lookup_.find(box_key(lo, hi));
    return it == lookup_.end() ? -1 : it->second;
}

void BallBasis::index() {
    lookup_.clear();
    lookup_.reserve(balls.size() * 2);
    root = -1;
    for (size_t i = 0; i < balls.size(); ++i) {
        balls[i].id = static_cast<int>(i);
        lookup_.emplace(box_key(balls[i].lo, balls[i].hi), static_cast<int>(i));
        const Ball& b = balls[i];
        if (b.lo[0] == 0 && b.lo[1] == 0 && b.hi[0] == space.shape[0] && b.hi[1] == space.shape[1])
            root = static_cast<int>(i);
    }
    leaf_.clear();
    topdown.clear();
    if (tree_structured()) {
        topdown.resize(balls.size());
        std::iota(topdown.begin(), topdown.end(), 0);
        std::stable_sort(topdown.begin(), topdown.end(),
                         [&](int a, int b) { return balls[static_cast<size_t>(a)].atoms() > balls[static_cast<size_t>(b)].atoms(); });
        leaf_.assign(static_cast<size_t>(space.size()), -1);
        for (const Ball& b : balls)
            if (b.atoms() == 1) leaf_[static_cast<size_t>(b.lo[1] * space.shape[0] + b.lo[0])] = b.id;
    }
}

int BallBasis::smallest_containing(const std::array<int, 2>& lo, const std::array<int, 2>& hi) const {
    int direct = find(lo, hi);
    if (direct >= 0) return direct;
    Ball probe;
    probe.lo = lo;
    probe.hi = hi;
    if (tree_structured()) {
        int v = leaf_[static_cast<size_t>(lo[1] * space.shape[0] + lo[0])];
        while (v >= 0 && !balls[static_cast<size_t>(v)].contains(probe)) v = parent[static_cast<size_t>(v)];
        return v;
    }
    int best = -1;
    for (const Ball& b : balls)
        if (b.contains(probe) && (best < 0 || b.measure < balls[static_cast<size_t>(best)].measure)) best = b.id;
    return best;
}

std::vector<int> BallBasis::containing(int atom) const {
    std::vector<int> out;
    if (tree_structured()) {
        for (int v = leaf_[static_cast<size_t>(atom)]; v >= 0; v = parent[static_cast<size_t>(v)]) out.push_back(v);
        return out;
    }
    for (const Ball& b : balls)
        if (b.contains_atom(atom, space.shape[0])) out.push_back(b.id);
    return out;
}

BallBasis build_dyadic_basis(int depth, const std::vector<double>& masses, bool include_root) {
    if (depth < 1 || depth > 20) throw std::invalid_argument("dyadic depth must be in [1, 20]");
    const int n = 1 << depth;
    if (static_cast<int>(masses.size()) != n) throw std::invalid_argument("dyadic basis needs 2^depth masses");
    BallBasis basis;
    basis.space = DiscreteSpace::line(masses);
    basis.kind = include_root ? BasisKind::dyadic_martingale : BasisKind::custom;
    basis.depth = depth;
    basis.c0 = 2.0;
    // heap order: node v has children 2v+1, 2v+2
    const int nodes = 2 * n - 1;
    std::vector<int> heap_to_id(static_cast<size_t>(nodes), -1);
    for (int v = include_root ? 0 : 1; v < nodes; ++v) {
        int level = 0;
        while ((2 << level) - 1 <= v) ++level;
        int k = v - ((1 << level) - 1);
        int len = n >> level;
        heap_to_id[static_cast<size_t>(v)] = static_cast<int>(basis.balls.size());
        basis.balls.push_back(make_ball(basis.space, {k * len, 0}, {(k + 1) * len, 1}));
    }
    basis.parent.assign(basis.balls.size(), -1);
    for (int v = 1; v < nodes; ++v) {
        int id = heap_to_id[static_cast<size_t>(v)];
        basis.parent[static_cast<size_t>(id)] = heap_to_id[static_cast<size_t>((v - 1) / 2)];
    }
    basis.index();
    basis.hull.assign(basis.balls.size(), -1);
    basis.saturated.assign(basis.balls.size(), 0);
    for (const Ball& b : basis.balls) {
        int h = b.id;
        for (int p = basis.parent[static_cast<size_t>(h)]; p >= 0 && basis.ball(p).measure <= 2.0 * b.measure;
             p = basis.parent[static_cast<size_t>(p)])
            h = p;
        basis.hull[static_cast<size_t>(b.id)] = h;
        basis.saturated[static_cast<size_t>(b.id)] = basis.parent[static_cast<size_t>(h)] < 0;
    }
    return basis;
}

BallBasis build_refined_dyadic_basis(int levels) {
    if (levels < 1 || levels > 1000) throw std::invalid_argument("refined dyadic basis needs 1 <= levels <= 1000");
    // atom 0 = [0, 2^-L), atom j = [2^-(L-j+1), 2^-(L-j)); balls are the atoms and the prefixes [0, j+1)
    std::vector<double> masses(static_cast<size_t>(levels) + 1);
    masses[0] = std::ldexp(1.0, -levels);
    for (int j = 1; j <= levels; ++j) masses[static_cast<size_t>(j)] = std::ldexp(1.0, -(levels - j + 1));
    BallBasis basis;
    basis.space = DiscreteSpace::line(masses);
    basis.kind = BasisKind::custom;
    basis.depth = levels;
    basis.c0 = 2.0;
    const int n = levels + 1;
    for (int j = 0; j < n; ++j) basis.balls.push_back(make_ball(basis.space, {j, 0}, {j + 1, 1}));
    for (int j = 2; j <= n; ++j) basis.balls.push_back(make_ball(basis.space, {0, 0}, {j, 1}));
    // prefix [0, j) has id n + j - 2
    basis.parent.assign(basis.balls.size(), -1);
    basis.parent[0] = n;
    for (int j = 1; j < n; ++j) basis.parent[static_cast<size_t>(j)] = n + j - 1;
    for (int j = 2; j < n; ++j) basis.parent[static_cast<size_t>(n + j - 2)] = n + j - 1;
    basis.index();
    basis.hull.assign(basis.balls.size(), -1);
    basis.saturated.assign(basis.balls.size(), 0);
    for (const Ball& b : basis.balls) {
        int h = b.id;
        for (int q = basis.parent[static_cast<size_t>(h)]; q >= 0 && basis.ball(q).measure <= 2.0 * b.measure * (1.0 + 1e-12);
             q = basis.parent[static_cast<size_t>(q)])
            h = q;
        basis.hull[static_cast<size_t>(b.id)] = h;
        basis.saturated[static_cast<size_t>(b.id)] = basis.parent[static_cast<size_t>(h)] < 0;
    }
    return basis;
}

BallBasis build_interval_basis(int n, const std::vector<double>& masses, double kappa) {
    if (n < 2) throw std::invalid_argument("interval basis needs n >= 2");
    if (static_cast<int>(masses.size()) != n) throw std::invalid_argument("interval basis needs n masses");
    if (!(kappa >= 1.0)) throw std::invalid_argument("kappa must be >= 1");
    BallBasis basis;
    basis.space = DiscreteSpace::line(masses);
    basis.kind = BasisKind::all_intervals;
    basis.kappa = kappa;
    basis.kappa_warning = kappa < 5.0;
    basis.c0 = kappa;
    basis.balls.reserve(static_cast<size_t>(n) * (n + 1) / 2);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b <= n; ++b) basis.balls.push_back(make_ball(basis.space, {a, 0}, {b, 1}));
    basis.index();
    basis.hull.assign(basis.balls.size(), -1);
    basis.saturated.assign(basis.balls.size(), 0);
    for (const Ball& b : basis.balls) {
        double center = 0.5 * (b.lo[0] + b.hi[0]);
        double half = 0.5 * kappa * (b.hi[0] - b.lo[0]);
        long lo = static_cast<long>(std::floor(center - half + 1e-9));
        long hi = static_cast<long>(std::ceil(center + half - 1e-9));
        bool clipped = lo < 0 || hi > n;
        lo = std::max(0L, lo);
        hi = std::min(static_cast<long>(n), hi);
        basis.hull[static_cast<size_t>(b.id)] = basis.find_interval(static_cast<int>(lo), static_cast<int>(hi));
        basis.saturated[static_cast<size_t>(b.id)] = clipped && lo == 0 && hi == n;
    }
    return basis;
}

namespace {

// Minimal bounding box of every ball B' with B' meeting B and mu(B') <= 2 mu(B).
std::vector<std::pair<std::array<int, 2>, std::array<int, 2>>> needed_boxes_exhaustive(const BallBasis& basis) {
    std::vector<std::pair<std::array<int, 2>, std::array<int, 2>>> out(basis.balls.size());
    for (const Ball& b : basis.balls) {
        std::array<int, 2> lo = b.lo, hi = b.hi;
        for (const Ball& c : basis.balls) {
            if (c.measure > 2.0 * b.measure * (1 + 1e-12) || !c.intersects(b)) continue;
            for (int d = 0; d < 2; ++d) {
                lo[static_cast<size_t>(d)] = std::min(lo[static_cast<size_t>(d)], c.lo[static_cast<size_t>(d)]);
                hi[static_cast<size_t>(d)] = std::max(hi[static_cast<size_t>(d)], c.hi[static_cast<size_t>(d)]);
            }
        }
        out[static_cast<size_t>(b.id)] = {lo, hi};
    }
    return out;
}

}  // namespace

BallBasis build_rect2d_candidate(int n) {
    if (n < 1 || n > 16) throw std::invalid_argument("rect2d candidate supports 1 <= n <= 16");
    BallBasis basis;
    basis.space = DiscreteSpace::lattice2d(n);
    basis.kind = BasisKind::rect2d_candidate;
    basis.c0 = 4.0;
    for (int x0 = 0; x0 < n; ++x0)
        for (int x1 = x0 + 1; x1 <= n; ++x1)
            for (int y0 = 0; y0 < n; ++y0)
                for (int y1 = y0 + 1; y1 <= n; ++y1)
                    basis.balls.push_back(make_ball(basis.space, {x0, y0}, {x1, y1}));
    basis.index();
    auto boxes = needed_boxes_exhaustive(basis);
    basis.hull.resize(basis.balls.size());
    basis.saturated.assign(basis.balls.size(), 0);
    for (const Ball& b : basis.balls) {
        auto [lo, hi] = boxes[static_cast<size_t>(b.id)];
        basis.hull[static_cast<size_t>(b.id)] = basis.find(lo, hi);
        basis.saturated[static_cast<size_t>(b.id)] = basis.hull[static_cast<size_t>(b.id)] == basis.root;
    }
    return basis;
}

int hull_power(const BallBasis& basis, int ball, int k) {
    if (k < 0) throw std::invalid_argument("hull power must be >= 0");
    for (int i = 0; i < k; ++i) ball = basis.hull[static_cast<size_t>(ball)];
    return ball;
}

AxiomReport verify_axioms(const BallBasis& basis) {
    AxiomReport rep;
    const int n_atoms = basis.space.size();
    const int nx = basis.space.shape[0];

    for (const Ball& b : basis.balls) {
        if (!(b.measure > 0.0) || !std::isfinite(b.measure) || b.atoms() <= 0) {
            rep.b1_pass = false;
            if (!rep.has_witness()) {
                rep.witness_balls = {b.id};
                rep.witness_note = "B1: ball with non-positive or infinite measure";
            }
        }
    }

    // For box-shaped balls two opposite corner atoms lie in a common ball only if Sigma is a ball.
    if (basis.root < 0) {
        rep.b2_pass = false;
        if (!rep.has_witness()) {
            rep.witness_atoms = {0, n_atoms - 1};
            rep.witness_note = "B2: no ball contains both atoms";
        }
    }

    {
        std::vector<std::vector<char>> probes;
        for (int i = 0; i < n_atoms; ++i) {
            std::vector<char> e(static_cast<size_t>(n_atoms), 0);
            e[static_cast<size_t>(i)] = 1;
            probes.push_back(std::move(e));
        }
        std::mt19937_64 rng(12345);
        std::bernoulli_distribution coin(0.4);
        for (int t = 0; t < 16; ++t) {
            std::vector<char> e(static_cast<size_t>(n_atoms), 0);
            for (auto& c : e) c = coin(rng);
            e[static_cast<size_t>(t % n_atoms)] = 1;
            probes.push_back(std::move(e));
        }
        for (const auto& e : probes) {
            std::vector<char> covered(static_cast<size_t>(n_atoms), 0);
            auto inner = cover_measurable(basis, e);
            for (int id : inner.balls) {
                const Ball& b = basis.ball(id);
                for (int y = b.lo[1]; y < b.hi[1]; ++y)
                    for (int x = b.lo[0]; x < b.hi[0]; ++x) covered[static_cast<size_t>(y * nx + x)] = 1;
            }
            for (int i = 0; i < n_atoms; ++i) {
                if (e[static_cast<size_t>(i)] != covered[static_cast<size_t>(i)]) {
                    rep.b3_pass = false;
                    if (!rep.has_witness()) {
                        rep.witness_atoms = {i};
                        rep.witness_note = "B3: probe set is not a union of balls at this atom";
                    }
                    break;
                }
            }
            if (!rep.b3_pass) break;
        }
    }

    // B4: needed hull = smallest ball engulfing every B' meeting B with mu(B') <= 2 mu(B).
    double eff = 1.0;
    int worst = -1;
    auto check_ball = [&](const Ball& b, std::array<int, 2> lo, std::array<int, 2> hi) {
        int needed = basis.smallest_containing(lo, hi);
        double ratio = needed < 0 ? std::numeric_limits<double>::infinity() : basis.ball(needed).measure / b.measure;
        if (ratio > eff) {
            eff = ratio;
            worst = b.id;
        }
        const Ball& h = basis.ball(basis.hull[static_cast<size_t>(b.id)]);
        Ball nb;
        nb.lo = lo;
        nb.hi = hi;
        bool engulfs = h.contains(nb) && h.contains(b);
        bool bounded = h.measure <= basis.c0 * b.measure * (1 + 1e-12);
        if ((!engulfs || !bounded) && rep.b4_pass) {
            rep.b4_pass = false;
            if (!rep.has_witness()) {
                rep.witness_balls = {b.id, h.id};
                if (!engulfs) {
                    for (const Ball& c : basis.balls) {
                        if (c.intersects(b) && c.measure <= 2.0 * b.measure * (1 + 1e-12) && !h.contains(c)) {
                            rep.witness_balls = {b.id, c.id, h.id};
                            break;
                        }
                    }
                    rep.witness_note = "B4: ball B' meets B with mu(B') <= 2 mu(B) but is not inside the hull";
                } else {
                    rep.witness_note = "B4: hull measure exceeds c0 * mu(B)";
                }
            }
        }
    };

    if (basis.tree_structured()) {
        for (const Ball& b : basis.balls) {
            int top = b.id;
            for (int p = basis.parent[static_cast<size_t>(top)]; p >= 0 && basis.ball(p).measure <= 2.0 * b.measure * (1 + 1e-12);
                 p = basis.parent[static_cast<size_t>(p)])
                top = p;
            check_ball(b, basis.ball(top).lo, basis.ball(top).hi);
        }
    } else if (basis.kind == BasisKind::all_intervals) {
        const auto& p = basis.space.prefix();
        const int n = nx;
        for (const Ball& b : basis.balls) {
            double budget = 2.0 * b.measure * (1 + 1e-12);
            // leftmost a with mu[a, lo+1) <= budget, rightmost b with mu[hi-1, b) <= budget
            int a = b.lo[0];
            {
                int lo = 0, hi = b.lo[0];
                while (lo < hi) {
                    int mid = (lo + hi) / 2;
                    if (p[static_cast<size_t>(b.lo[0] + 1)] - p[static_cast<size_t>(mid)] <= budget) hi = mid; else lo = mid + 1;
                }
                a = lo;
            }
            int e = b.hi[0];
            {
                int lo = b.hi[0], hi = n;
                while (lo < hi) {
                    int mid = (lo + hi + 1) / 2;
                    if (p[static_cast<size_t>(mid)] - p[static_cast<size_t>(b.hi[0] - 1)] <= budget) lo = mid; else hi = mid - 1;
                }
                e = lo;
            }
            check_ball(b, {a, 0}, {e, 1});
        }
    } else {
        auto boxes = needed_boxes_exhaustive(basis);
        for (const Ball& b : basis.balls) check_ball(b, boxes[static_cast<size_t>(b.id)].first, boxes[static_cast<size_t>(b.id)].second);
    }
    rep.effective_c0 = eff;

    if (!rep.b4_pass && basis.kind == BasisKind::rect2d_candidate && worst >= 0) {
        // Report the extremal ball together with its widest and tallest qualifying rectangles.
        const Ball& b = basis.ball(worst);
        int wide = -1, tall = -1;
        for (const Ball& c : basis.balls) {
            if (!c.intersects(b) || c.measure > 2.0 * b.measure * (1 + 1e-12)) continue;
            if (wide < 0 || c.hi[0] - c.lo[0] > basis.ball(wide).hi[0] - basis.ball(wide).lo[0]) wide = c.id;
            if (tall < 0 || c.hi[1] - c.lo[1] > basis.ball(tall).hi[1] - basis.ball(tall).lo[1]) tall = c.id;
        }
        rep.witness_balls = {b.id, wide, tall, basis.hull[static_cast<size_t>(b.id)]};
        rep.witness_note = "B4: thin rectangles of measure <= 2 mu(B) meeting B force a hull larger than c0 * mu(B)";
    }
    return rep;
}

CoverResult cover_measurable(const BallBasis& basis, const std::vector<char>& in_set) {
    CoverResult res;
    const int n_atoms = basis.space.size();
    const int nx = basis.space.shape[0];
    if (static_cast<int>(in_set.size()) != n_atoms) throw std::invalid_argument("set mask size mismatch");
    double mu_e = 0.0;
    for (int i = 0; i < n_atoms; ++i)
        if (in_set[static_cast<size_t>(i)]) mu_e += basis.space.masses[static_cast<size_t>(i)];
    if (mu_e <= 0.0) return res;

    std::vector<char> covered(static_cast<size_t>(n_atoms), 0);
    auto inside = [&](const Ball& b) {
        for (int y = b.lo[1]; y < b.hi[1]; ++y)
            for (int x = b.lo[0]; x < b.hi[0]; ++x)
                if (!in_set[static_cast<size_t>(y * nx + x)]) return false;
        return true;
    };
    auto mark = [&](int id) {
        const Ball& b = basis.ball(id);
        for (int y = b.lo[1]; y < b.hi[1]; ++y)
            for (int x = b.lo[0]; x < b.hi[0]; ++x) covered[static_cast<size_t>(y * nx + x)] = 1;
        res.balls.push_back(id);
    };

    for (int i = 0; i < n_atoms; ++i) {
        if (!in_set[static_cast<size_t>(i)] || covered[static_cast<size_t>(i)]) continue;
        int pick = -1;
        if (basis.tree_structured()) {
            for (int v = basis.leaf(i); v >= 0 && inside(basis.ball(v)); v = basis.parent[static_cast<size_t>(v)]) pick = v;
            if (pick < 0) pick = basis.leaf(i);
        } else if (basis.kind == BasisKind::all_intervals) {
            int e = i;
            while (e < n_atoms && in_set[static_cast<size_t>(e)]) ++e;
            pick = basis.find_interval(i, e);
        } else {
            int fallback = -1;
            for (const Ball& b : basis.balls) {
                if (!b.contains_atom(i, nx)) continue;
                if (inside(b)) {
                    if (pick < 0 || b.measure > basis.ball(pick).measure) pick = b.id;
                } else if (fallback < 0 || b.measure < basis.ball(fallback).measure) {
                    fallback = b.id;
                }
            }
            if (pick < 0) pick = fallback;
        }
        if (pick < 0) continue;
        mark(pick);
    }
    double total = 0.0;
    for (int id : res.balls) total += basis.ball(id).measure;
    res.ratio = total / mu_e;
    res.within_budget = res.ratio <= 2.0 * basis.c0 * (1 + 1e-12);
    return res;
}

int overlap_count(const BallBasis& basis, const std::vector<int>& family) {
    const int nx = basis.space.shape[0];
    std::vector<int> count(static_cast<size_t>(basis.space.size()), 0);
    int best = 0;
    for (int id : family) {
        const Ball& b = basis.ball(id);
        for (int y = b.lo[1]; y < b.hi[1]; ++y)
            for (int x = b.lo[0]; x < b.hi[0]; ++x) best = std::max(best, ++count[static_cast<size_t>(y * nx + x)]);
    }
    return best;
}

BesicovitchResult besicovitch_subfamily(const BallBasis& basis, const std::vector<int>& family) {
    BesicovitchResult res;
    if (family.empty()) throw std::invalid_argument("family must be nonempty");
    const int nx = basis.space.shape[0];
    std::vector<int> order = family;
    std::sort(order.begin(), order.end());
    order.erase(std::unique(order.begin(), order.end()), order.end());
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const Ball &x = basis.ball(a), &y = basis.ball(b);
        if (x.measure != y.measure) return x.measure > y.measure;
        return x.lo < y.lo;
    });
    std::vector<int> count(static_cast<size_t>(basis.space.size()), 0);
    auto for_atoms = [&](int id, auto&& fn) {
        const Ball& b = basis.ball(id);
        for (int y = b.lo[1]; y < b.hi[1]; ++y)
            for (int x = b.lo[0]; x < b.hi[0]; ++x) fn(y * nx + x);
    };
    std::vector<int> kept;
    for (int id : order) {
        bool adds = false;
        for_atoms(id, [&](int a) { adds = adds || count[static_cast<size_t>(a)] == 0; });
        if (!adds) continue;
        kept.push_back(id);
        for_atoms(id, [&](int a) { ++count[static_cast<size_t>(a)]; });
    }
    // drop members whose atoms are all covered by the remaining members
    for (auto it = kept.rbegin(); it != kept.rend();) {
        bool redundant = true;
        for_atoms(*it, [&](int a) { redundant = redundant && count[static_cast<size_t>(a)] > 1; });
        if (redundant) {
            for_atoms(*it, [&](int a) { --count[static_cast<size_t>(a)]; });
            it = decltype(it)(kept.erase(std::next(it).base()));
        } else {
            ++it;
        }
    }
    std::sort(kept.begin(), kept.end(), [&](int a, int b) { return basis.ball(a).lo < basis.ball(b).lo; });
    res.subfamily = kept;
    res.n0 = overlap_count(basis, kept);
    return res;
}

nlohmann::json basis_to_json(const BallBasis& basis) {
    nlohmann::json j;
    j["kind"] = to_string(basis.kind);
    j["dim"] = basis.space.dim;
    j["shape"] = {basis.space.shape[0], basis.space.shape[1]};
    j["masses"] = basis.space.masses;
    j["origin"] = basis.space.origin;
    j["cell"] = basis.space.cell;
    j["c0"] = basis.c0;
    if (basis.kind == BasisKind::all_intervals) j["kappa"] = basis.kappa;
    j["depth"] = basis.depth;
    nlohmann::json balls = nlohmann::json::array();
    for (const Ball& b : basis.balls) balls.push_back({b.lo[0], b.hi[0], b.lo[1], b.hi[1]});
    j["balls"] = balls;
    j["hull"] = basis.hull;
    j["parent"] = basis.parent;
    std::vector<int> sat(basis.saturated.begin(), basis.saturated.end());
    j["saturated"] = sat;
    return j;
}

BallBasis basis_from_json(const nlohmann::json& j) {
    BallBasis basis;
    basis.kind = basis_kind_from_string(j.at("kind").get<std::string>());
    int dim = j.at("dim").get<int>();
    auto masses = j.at("masses").get<std::vector<double>>();
    check_masses(masses);
    if (dim == 1) {
        basis.space = DiscreteSpace::line(masses, j.value("origin", 0.0), j.value("cell", -1.0));
    } else {
        auto shape = j.at("shape").get<std::vector<int>>();
        basis.space.dim = 2;
        basis.space.shape = {shape.at(0), shape.at(1)};
        basis.space.masses = masses;
        basis.space.cell = j.value("cell", 1.0 / shape.at(0));
        basis.space.rebuild();
    }
    basis.c0 = j.at("c0").get<double>();
    basis.kappa = j.value("kappa", 0.0);
    basis.kappa_warning = basis.kind == BasisKind::all_intervals && basis.kappa < 5.0;
    basis.depth = j.value("depth", 0);
    for (const auto& e : j.at("balls")) {
        auto v = e.get<std::vector<int>>();
        if (v.size() != 4 || v[0] >= v[1] || v[2] >= v[3] || v[0] < 0 || v[2] < 0 || v[1] > basis.space.shape[0] ||
            v[3] > basis.space.shape[1])
            throw std::invalid_argument("malformed ball extent");
        basis.balls.push_back(make_ball(basis.space, {v[0], v[2]}, {v[1], v[3]}));
    }
    basis.hull = j.at("hull").get<std::vector<int>>();
    if (basis.hull.size() != basis.balls.size()) throw std::invalid_argument("hull table size mismatch");
    for (int h : basis.hull)
        if (h < 0 || h >= static_cast<int>(basis.balls.size())) throw std::invalid_argument("hull id out of range");
    if (j.contains("parent")) basis.parent = j.at("parent").get<std::vector<int>>();
    if (!basis.parent.empty() && basis.parent.size() != basis.balls.size()) throw std::invalid_argument("parent table size mismatch");
    if (j.contains("saturated")) {
        auto sat = j.at("saturated").get<std::vector<int>>();
        basis.saturated.assign(sat.begin(), sat.end());
    } else {
        basis.saturated.assign(basis.balls.size(), 0);
    }
    basis.index();
    return basis;
}

}  // namespace sparselab
