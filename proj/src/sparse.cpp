#include "sparselab/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <stdexcept>

#include "sparselab/random.hpp"

namespace sparselab {

namespace {

std::vector<int> atoms_of(const BallBasis& basis, const Ball& b) {
    std::vector<int> out;
    out.reserve(static_cast<size_t>(b.atoms()));
    const int nx = basis.space.shape[0];
    for (int y = b.lo[1]; y < b.hi[1]; ++y)
        for (int x = b.lo[0]; x < b.hi[0]; ++x) out.push_back(y * nx + x);
    return out;
}

double atoms_measure(const BallBasis& basis, const std::vector<int>& atoms) {
    double s = 0.0;
    for (int a : atoms) s += basis.space.masses[static_cast<size_t>(a)];
    return s;
}

// direct-summation average so that results are reproducible by a naive loop
double direct_average(const BallBasis& basis, const GridFunction& f, const Ball& b, double r) {
    double s = 0.0;
    for (int a : atoms_of(basis, b)) s += std::pow(std::abs(f[static_cast<size_t>(a)]), r) * basis.space.masses[static_cast<size_t>(a)];
    return std::pow(s / b.measure, 1.0 / r);
}

double plain_mean(const BallBasis& basis, const GridFunction& f, const Ball& b) {
    double s = 0.0;
    for (int a : atoms_of(basis, b)) s += f[static_cast<size_t>(a)] * basis.space.masses[static_cast<size_t>(a)];
    return s / b.measure;
}

GridFunction restrict_ball(const BallBasis& basis, const GridFunction& f, int ball) {
    GridFunction g(f.size(), 0.0);
    for (int a : atoms_of(basis, basis.ball(ball))) g[static_cast<size_t>(a)] = f[static_cast<size_t>(a)];
    return g;
}

}  // namespace

SparseCheck verify_sparse(const BallBasis& basis, const SparseFamily& family, double eta) {
    SparseCheck chk;
    if (family.cores.size() != family.balls.size()) {
        chk.ok = false;
        chk.note = "core count differs from ball count";
        return chk;
    }
    std::vector<int> owner(static_cast<size_t>(basis.space.size()), -1);
    const int nx = basis.space.shape[0];
    for (size_t k = 0; k < family.balls.size(); ++k) {
        const Ball& b = basis.ball(family.balls[k]);
        for (int a : family.cores[k]) {
            if (!b.contains_atom(a, nx)) {
                if (chk.ok) {
                    chk.ok = false;
                    chk.witness_a = static_cast<int>(k);
                    chk.witness_atom = a;
                    chk.note = "core leaves its ball";
                }
                continue;
            }
            int& o = owner[static_cast<size_t>(a)];
            if (o >= 0 && chk.ok) {
                chk.ok = false;
                chk.witness_a = o;
                chk.witness_b = static_cast<int>(k);
                chk.witness_atom = a;
                chk.note = "cores overlap";
            }
            o = static_cast<int>(k);
        }
        double ratio = atoms_measure(basis, family.cores[k]) / b.measure;
        chk.min_ratio = std::min(chk.min_ratio, ratio);
        if (ratio < eta * (1.0 - 1e-12) && chk.ok) {
            chk.ok = false;
            chk.witness_a = static_cast<int>(k);
            chk.note = "core too small";
        }
    }
    return chk;
}

SparseFamily carve_cores(const BallBasis& basis, const std::vector<int>& balls, bool smallest_first) {
    SparseFamily fam;
    fam.balls = balls;
    fam.cores.assign(balls.size(), {});
    std::vector<size_t> order(balls.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        double ma = basis.ball(balls[a]).measure, mb = basis.ball(balls[b]).measure;
        return smallest_first ? ma < mb : ma > mb;
    });
    std::vector<char> claimed(static_cast<size_t>(basis.space.size()), 0);
    fam.eta = balls.empty() ? 0.0 : 1.0;
    for (size_t k : order) {
        const Ball& b = basis.ball(balls[k]);
        for (int a : atoms_of(basis, b))
            if (!claimed[static_cast<size_t>(a)]) {
                claimed[static_cast<size_t>(a)] = 1;
                fam.cores[k].push_back(a);
            }
        fam.eta = std::min(fam.eta, atoms_measure(basis, fam.cores[k]) / b.measure);
    }
    return fam;
}

GridFunction eval_sparse(const BallBasis& basis, const std::vector<GridFunction>& fs, const SparseFamily& family, const std::vector<double>& r) {
    if (r.size() != fs.size()) throw std::invalid_argument("eval_sparse: one exponent per function");
    GridFunction out(static_cast<size_t>(basis.space.size()), 0.0);
    for (int id : family.balls) {
        const Ball& b = basis.ball(id);
        double lam = 1.0;
        for (size_t i = 0; i < fs.size(); ++i) lam *= direct_average(basis, fs[i], b, r[i]);
        for (int a : atoms_of(basis, b)) out[static_cast<size_t>(a)] += lam;
    }
    return out;
}

GridFunction eval_sparse_commutator(const BallBasis& basis, const std::vector<GridFunction>& fs, const std::vector<GridFunction>& bs,
                                    const std::vector<int>& tau1, const std::vector<int>& tau2, const SparseFamily& family,
                                    const std::vector<double>& r) {
    const size_t m = fs.size();
    if (r.size() != m || bs.size() != m) throw std::invalid_argument("eval_sparse_commutator: arity mismatch");
    std::vector<int> role(m, 0);
    for (int i : tau1) {
        if (i < 0 || static_cast<size_t>(i) >= m) throw std::invalid_argument("tau index out of range");
        role[static_cast<size_t>(i)] = 1;
    }
    for (int i : tau2) {
        if (i < 0 || static_cast<size_t>(i) >= m) throw std::invalid_argument("tau index out of range");
        if (role[static_cast<size_t>(i)] != 0) throw std::invalid_argument("tau1 and tau2 must be disjoint");
        role[static_cast<size_t>(i)] = 2;
    }
    GridFunction out(static_cast<size_t>(basis.space.size()), 0.0);
    for (int id : family.balls) {
        const Ball& b = basis.ball(id);
        double lam = 1.0;
        std::vector<std::pair<size_t, double>> pointwise;
        for (size_t i = 0; i < m; ++i) {
            if (role[i] == 0) {
                lam *= direct_average(basis, fs[i], b, r[i]);
            } else if (role[i] == 1) {
                lam *= direct_average(basis, fs[i], b, r[i]);
                pointwise.emplace_back(i, plain_mean(basis, bs[i], b));
            } else {
                double mean = plain_mean(basis, bs[i], b);
                GridFunction g(fs[i].size());
                for (size_t a = 0; a < g.size(); ++a) g[a] = (bs[i][a] - mean) * fs[i][a];
                lam *= direct_average(basis, g, b, r[i]);
            }
        }
        for (int a : atoms_of(basis, b)) {
            double v = lam;
            for (auto& [i, mean] : pointwise) v *= std::abs(bs[i][static_cast<size_t>(a)] - mean);
            out[static_cast<size_t>(a)] += v;
        }
    }
    return out;
}

int level_of(const BallBasis& basis, int ball) {
    double x = 0.5 * std::log(basis.ball(ball).measure) / std::log(basis.c0);
    return static_cast<int>(std::floor(x + 1e-9));
}

namespace {

int strict_enlargement(const BallBasis& basis, int ball) {
    if (basis.tree_structured()) return basis.parent[static_cast<size_t>(ball)];
    const Ball& b = basis.ball(ball);
    int best = -1;
    for (const Ball& c : basis.balls)
        if (c.contains(b) && !c.same_extent(b) && (best < 0 || c.measure < basis.ball(best).measure)) best = c.id;
    return best;
}

}  // namespace

int chain_next(const BallBasis& basis, int ball) {
    const double target = 2.0 * basis.ball(ball).measure;
    int cur = hull_power(basis, ball, 2);
    while (basis.ball(cur).measure < target) {
        int nxt = basis.hull[static_cast<size_t>(cur)];
        if (nxt == cur) {
            nxt = strict_enlargement(basis, cur);
            if (nxt < 0) return cur;
        }
        cur = nxt;
    }
    return cur;
}

double estimate_gamma_norm(const Operator& op, double cT, const SamplingOptions& opt) {
    const auto& sp = op.basis().space;
    double best = 0.0;
    for (int s = 0; s < opt.n_samples; ++s) {
        std::vector<GridFunction> fs;
        for (int i = 0; i < op.arity(); ++i) {
            GridFunction f = corpus_function(Recipe::mixed, sp, opt.seed ^ 0x6a3dULL, static_cast<std::uint64_t>(s) * 16 + static_cast<std::uint64_t>(i));
            double nrm = lp_norm(sp, f, op.r());
            for (auto& v : f) v /= nrm;
            fs.push_back(std::move(f));
        }
        GridFunction g = gamma_majorant(op, fs, cT);
        best = std::max(best, weak_norm(g, op.r() / op.arity(), sp.masses));
    }
    return best;
}

namespace {

struct RestartNeeded {
    double new_norm;
};

struct TreeNode {
    int ball = -1;
    int parent = -1;      // first discovered parent ball
    int generation = 0;
    std::vector<int> children;   // F(A), deduplicated
};

class StoppingTree {
public:
    StoppingTree(const Operator& op, const std::vector<GridFunction>& g, double cT, double lambda, double gamma_norm)
        : op_(op), basis_(op.basis()), g_(g), cT_(cT), lambda_(lambda), gamma_norm_(gamma_norm) {}

    std::map<int, TreeNode> nodes;
    std::map<int, GridFunction> gamma_cache;
    std::vector<int> generation_counts;
    std::string violation;

    bool build(int b0, int max_generations) {
        nodes[b0] = TreeNode{b0, -1, 0, {}};
        std::vector<int> current = {b0};
        generation_counts.push_back(1);
        for (int gen = 0; !current.empty(); ++gen) {
            if (gen >= max_generations) {
                violation = "generation cap reached";
                return false;
            }
            std::vector<int> next;
            for (int a : current) {
                auto kids = expand(a);
                nodes[a].children = kids;
                for (int k : kids)
                    if (!nodes.count(k)) {
                        nodes[k] = TreeNode{k, a, gen + 1, {}};
                        next.push_back(k);
                    }
            }
            std::sort(next.begin(), next.end());
            next.erase(std::unique(next.begin(), next.end()), next.end());
            if (!next.empty()) generation_counts.push_back(static_cast<int>(next.size()));
            current = std::move(next);
        }
        return true;
    }

    GridFunction gamma_of(int a, const std::vector<char>* where, double& den) const {
        int a3 = hull_power(basis_, a, 3);
        std::vector<GridFunction> h;
        den = 1.0;
        for (const auto& f : g_) {
            h.push_back(restrict_ball(basis_, f, a3));
            den *= ball_average(basis_, h.back(), a3, op_.r());
        }
        if (!(den > 0.0)) return GridFunction(static_cast<size_t>(basis_.space.size()), 0.0);
        auto it = gamma_cache.find(a);
        if (it != gamma_cache.end()) {
            GridFunction out = it->second;
            if (where)
                for (size_t i = 0; i < out.size(); ++i)
                    if (!(*where)[i]) out[i] = 0.0;
            return out;
        }
        return gamma_majorant(op_, h, cT_, where);
    }

private:
    const Operator& op_;
    const BallBasis& basis_;
    const std::vector<GridFunction>& g_;
    double cT_, lambda_, gamma_norm_;

    bool inside(const std::vector<int>& fcount, int ball) const {
        const Ball& b = basis_.ball(ball);
        if (basis_.space.dim == 1) return fcount[static_cast<size_t>(b.hi[0])] - fcount[static_cast<size_t>(b.lo[0])] == b.atoms();
        const int nx = basis_.space.shape[0];
        for (int y = b.lo[1]; y < b.hi[1]; ++y)
            for (int x = b.lo[0]; x < b.hi[0]; ++x)
                if (fcount[static_cast<size_t>(y * nx + x) + 1] - fcount[static_cast<size_t>(y * nx + x)] == 0) return false;
        return true;
    }

    std::vector<int> expand(int a) {
        const auto& sp = basis_.space;
        const int n = sp.size();
        double den = 0.0;
        GridFunction gam = gamma_of(a, nullptr, den);
        if (!(den > 0.0)) return {};
        gamma_cache[a] = gam;
        const double m = op_.arity(), r = op_.r();
        int a3 = hull_power(basis_, a, 3);
        // weak-type check of Gamma on this input; the frozen norm must dominate it
        double in_norm = 1.0;
        for (const auto& f : g_) in_norm *= lp_norm(sp, restrict_ball(basis_, f, a3), r);
        double ratio = weak_norm(gam, r / m, sp.masses) / in_norm;
        if (ratio > gamma_norm_) throw RestartNeeded{ratio * (1.0 + 1e-9)};
        double thr = std::pow(2.0, m / r) * std::pow(basis_.c0, 3.0 * m / r) * std::pow(lambda_, m / r) * gamma_norm_ * den;
        std::vector<char> inF(static_cast<size_t>(n), 0);
        std::vector<int> fcount(static_cast<size_t>(n) + 1, 0);
        double muF = 0.0;
        for (int i = 0; i < n; ++i) {
            inF[static_cast<size_t>(i)] = gam[static_cast<size_t>(i)] > thr;
            fcount[static_cast<size_t>(i) + 1] = fcount[static_cast<size_t>(i)] + inF[static_cast<size_t>(i)];
            if (inF[static_cast<size_t>(i)]) muF += sp.masses[static_cast<size_t>(i)];
        }
        const Ball& A = basis_.ball(a);
        if (muF > A.measure / lambda_ * (1.0 + 1e-12) && violation.empty()) violation = "level set larger than mu(A)/lambda";
        const Ball& hA = basis_.ball(basis_.hull[static_cast<size_t>(a)]);
        std::vector<char> E(static_cast<size_t>(n), 0);
        bool any = false;
        for (int i = 0; i < n; ++i)
            if (inF[static_cast<size_t>(i)] && hA.contains_atom(i, sp.shape[0])) {
                E[static_cast<size_t>(i)] = 1;
                any = true;
            }
        if (!any) return {};
        CoverResult cover = cover_measurable(basis_, E);
        std::vector<int> out;
        for (int b : cover.balls) {
            int cur = b;
            for (;;) {
                int nxt = chain_next(basis_, cur);
                if (nxt == cur || !inside(fcount, basis_.hull[static_cast<size_t>(nxt)])) break;
                cur = nxt;
            }
            out.push_back(cur);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        out.erase(std::remove(out.begin(), out.end(), a), out.end());
        // guarantee mu(U G*) <= 3 c0^2 mu(A) / lambda
        std::vector<char> cov(static_cast<size_t>(n), 0);
        double mu = 0.0;
        for (int gb : out)
            for (int at : atoms_of(basis_, basis_.ball(basis_.hull[static_cast<size_t>(gb)])))
                if (!cov[static_cast<size_t>(at)]) {
                    cov[static_cast<size_t>(at)] = 1;
                    mu += sp.masses[static_cast<size_t>(at)];
                }
        if (mu > 3.0 * basis_.c0 * basis_.c0 * A.measure / lambda_ * (1.0 + 1e-12) && violation.empty())
            violation = "stopping hulls exceed 3 c0^2 mu(A) / lambda";
        return out;
    }
};

double union_measure(const BallBasis& basis, const std::set<int>& balls) {
    std::vector<char> cov(static_cast<size_t>(basis.space.size()), 0);
    double mu = 0.0;
    for (int b : balls)
        for (int a : atoms_of(basis, basis.ball(b)))
            if (!cov[static_cast<size_t>(a)]) {
                cov[static_cast<size_t>(a)] = 1;
                mu += basis.space.masses[static_cast<size_t>(a)];
            }
    return mu;
}

}  // namespace

DominationResult construct_domination(const Operator& op, const std::vector<GridFunction>& fs, int b0, const DominationOptions& opt) {
    const BallBasis& basis = op.basis();
    const double c0 = basis.c0;
    DominationResult res;
    res.lambda_used = opt.lambda > 0.0 ? opt.lambda : 4.0 * std::pow(c0, 6);
    if (!(res.lambda_used > 3.0 * std::pow(c0, 6))) throw std::invalid_argument("lambda must exceed 3 c0^6");
    if (static_cast<int>(fs.size()) != op.arity()) throw std::invalid_argument("construct_domination: arity mismatch");
    const double r = op.r();
    for (const auto& f : fs) {
        GridFunction inb = restrict_ball(basis, f, b0);
        double in = std::pow(lp_norm(basis.space, inb, r), r), all = std::pow(lp_norm(basis.space, f, r), r);
        if (in < 0.5 * all * (1.0 - 1e-12)) throw std::invalid_argument("input mass outside B0 exceeds one half");
    }
    res.cT = opt.cT > 0.0 ? opt.cT : estimate_constants(op, opt.sampling).total();
    res.gamma_norm_used = opt.gamma_norm > 0.0 ? opt.gamma_norm : estimate_gamma_norm(op, res.cT, opt.sampling);
    res.sparse_eta_required = 1.0 / (2.0 * c0 * c0 * c0);

    const int b03 = hull_power(basis, b0, 3);
    std::vector<GridFunction> g;
    for (const auto& f : fs) g.push_back(restrict_ball(basis, f, b03));

    std::unique_ptr<StoppingTree> tree;
    for (;;) {
        tree = std::make_unique<StoppingTree>(op, g, res.cT, res.lambda_used, res.gamma_norm_used);
        try {
            if (!tree->build(b0, opt.max_generations)) {
                res.aborted = true;
                res.abort_reason = tree->violation;
            }
            break;
        } catch (const RestartNeeded& rn) {
            if (res.gamma_raises >= opt.max_gamma_raises) {
                res.aborted = true;
                res.abort_reason = "Gamma norm kept growing";
                return res;
            }
            res.gamma_norm_used = rn.new_norm;
            ++res.gamma_raises;
        }
    }
    if (!tree->violation.empty() && !res.aborted) {
        res.aborted = true;
        res.abort_reason = tree->violation;
    }
    auto& nodes = tree->nodes;
    res.generation_counts = tree->generation_counts;
    res.max_depth = static_cast<int>(res.generation_counts.size()) - 1;
    res.tree_size = static_cast<int>(nodes.size());

    // generation decay for every tree ball
    const double q = 3.0 * c0 * c0 / res.lambda_used;
    for (const auto& [id, node] : nodes) {
        std::set<int> gen(node.children.begin(), node.children.end());
        for (int k = 1; !gen.empty() && k <= opt.max_generations; ++k) {
            double ratio = union_measure(basis, gen) / (std::pow(q, k) * basis.ball(id).measure);
            res.fkfk_worst = std::max(res.fkfk_worst, ratio);
            std::set<int> nxt;
            for (int b : gen) {
                auto it = nodes.find(b);
                if (it != nodes.end()) nxt.insert(it->second.children.begin(), it->second.children.end());
            }
            gen.swap(nxt);
        }
    }
    res.fkfk_ok = res.fkfk_worst <= 1.0 + 1e-12;
    if (!res.fkfk_ok && !res.aborted) {
        res.aborted = true;
        res.abort_reason = "generation measure decay violated";
    }

    std::map<int, int> lvl;
    for (const auto& [id, node] : nodes) lvl[id] = level_of(basis, id);
    res.level_gap_min = std::numeric_limits<double>::infinity();
    for (const auto& [id, node] : nodes)
        if (node.parent >= 0) res.level_gap_min = std::min(res.level_gap_min, static_cast<double>(lvl[node.parent] - lvl[id]));
    if (!std::isfinite(res.level_gap_min)) res.level_gap_min = 0.0;

    // excluded family: B with some B' meeting B^(2) at a level strictly between r(B)+1 and r(parent)-1
    std::set<int> bad;
    for (const auto& [id, node] : nodes) {
        if (node.parent < 0) continue;
        const Ball& b2 = basis.ball(hull_power(basis, id, 2));
        int lo = lvl[id] + 2, hi = lvl[node.parent] - 2;
        if (lo > hi) continue;
        for (const auto& [jd, other] : nodes) {
            int l = lvl[jd];
            if (l >= lo && l <= hi && b2.intersects(basis.ball(jd))) {
                bad.insert(id);
                break;
            }
        }
    }
    res.bad_count = static_cast<int>(bad.size());
    std::set<int> excluded;
    for (int b : bad) {
        std::vector<int> stack = {b};
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            if (!excluded.insert(v).second) continue;
            for (int c : nodes[v].children) stack.push_back(c);
        }
    }
    const int k0 = lvl[b0];
    std::map<int, std::vector<int>> H;
    H[k0] = {b0};
    for (const auto& [id, node] : nodes)
        if (id != b0 && lvl[id] < k0 && !excluded.count(id)) H[lvl[id]].push_back(id);

    std::vector<int> D1, D2, Dall;
    for (auto& [k, members] : H) {
        std::stable_sort(members.begin(), members.end(), [&](int a, int b) {
            double ma = basis.ball(a).measure, mb = basis.ball(b).measure;
            return ma != mb ? ma > mb : a < b;
        });
        std::vector<int> chosen;
        for (int b : members) {
            bool disjoint = true;
            for (int c : chosen)
                if (basis.ball(c).intersects(basis.ball(b))) {
                    disjoint = false;
                    break;
                }
            if (disjoint) chosen.push_back(b);
        }
        for (int b : chosen) {
            Dall.push_back(b);
            (((k % 2) + 2) % 2 == 1 ? D1 : D2).push_back(b);
        }
    }

    auto lift = [&](const std::vector<int>& D) {
        SparseFamily carved = carve_cores(basis, D, true);
        SparseFamily s;
        s.cores = carved.cores;
        s.eta = D.empty() ? 0.0 : 1.0;
        for (size_t i = 0; i < D.size(); ++i) {
            int b3 = hull_power(basis, D[i], 3);
            s.balls.push_back(b3);
            s.eta = std::min(s.eta, atoms_measure(basis, s.cores[i]) / basis.ball(b3).measure);
        }
        return s;
    };
    res.s1 = lift(D1);
    res.s2 = lift(D2);
    res.s1_ok = verify_sparse(basis, res.s1, res.sparse_eta_required).ok;
    res.s2_ok = verify_sparse(basis, res.s2, res.sparse_eta_required).ok;

    // Gamma bound on B* away from lower-level hulls
    const int n = basis.space.size();
    for (int b : Dall) {
        std::vector<char> where(static_cast<size_t>(n), 0);
        bool any = false;
        for (int a : atoms_of(basis, basis.ball(basis.hull[static_cast<size_t>(b)]))) where[static_cast<size_t>(a)] = 1;
        for (int c : Dall)
            if (lvl[c] < lvl[b])
                for (int a : atoms_of(basis, basis.ball(basis.hull[static_cast<size_t>(c)]))) where[static_cast<size_t>(a)] = 0;
        for (char w : where) any = any || w;
        if (!any) continue;
        double den = 0.0;
        GridFunction gam = tree->gamma_of(b, &where, den);
        if (!(den > 0.0)) continue;
        for (int i = 0; i < n; ++i)
            if (where[static_cast<size_t>(i)]) res.gafb_constant = std::max(res.gafb_constant, gam[static_cast<size_t>(i)] / (res.cT * den));
    }

    verify_pointwise_domination(op, fs, b0, res);
    return res;
}

double verify_pointwise_domination(const Operator& op, const std::vector<GridFunction>& fs, int b0, DominationResult& result, const CommutatorData* comm) {
    const BallBasis& basis = op.basis();
    const int b03 = hull_power(basis, b0, 3);
    std::vector<GridFunction> g;
    for (const auto& f : fs) g.push_back(restrict_ball(basis, f, b03));
    std::vector<double> rv(g.size(), op.r());
    GridFunction num, den(static_cast<size_t>(basis.space.size()), 0.0);
    if (comm == nullptr || std::all_of(comm->alpha.begin(), comm->alpha.end(), [](int a) { return a == 0; })) {
        num = op.apply(g);
        GridFunction a1 = eval_sparse(basis, g, result.s1, rv), a2 = eval_sparse(basis, g, result.s2, rv);
        for (size_t i = 0; i < den.size(); ++i) den[i] = a1[i] + a2[i];
    } else {
        CommutatorSpec cs{op.spec(), comm->symbols, comm->alpha};
        num = op.apply_commutator(cs, g);
        std::vector<int> tau = cs.tau();
        const size_t t = tau.size();
        for (unsigned long mask = 0; mask < (1UL << t); ++mask) {
            std::vector<int> t1, t2;
            for (size_t k = 0; k < t; ++k) ((mask >> k) & 1UL ? t1 : t2).push_back(tau[k]);
            GridFunction a1 = eval_sparse_commutator(basis, g, comm->symbols, t1, t2, result.s1, rv);
            GridFunction a2 = eval_sparse_commutator(basis, g, comm->symbols, t1, t2, result.s2, rv);
            for (size_t i = 0; i < den.size(); ++i) den[i] += a1[i] + a2[i];
        }
    }
    double scale = 0.0;
    for (double v : num) scale = std::max(scale, std::abs(v));
    const double tiny = 1e-13 * scale;
    double worst = 0.0;
    int covered = 0, total = 0;
    for (int a : atoms_of(basis, basis.ball(b0))) {
        ++total;
        double nv = std::abs(num[static_cast<size_t>(a)]), dv = den[static_cast<size_t>(a)];
        if (dv > 0.0) {
            ++covered;
            worst = std::max(worst, nv / dv);
        } else if (nv > tiny) {
            worst = std::numeric_limits<double>::infinity();
        }
    }
    result.pointwise_constant = worst;
    result.coverage = total ? static_cast<double>(covered) / total : 0.0;
    return worst;
}

nlohmann::json to_json(const BallBasis& basis, const SparseFamily& f) {
    nlohmann::json j;
    j["eta"] = f.eta;
    nlohmann::json balls = nlohmann::json::array();
    for (size_t k = 0; k < f.balls.size(); ++k) {
        const Ball& b = basis.ball(f.balls[k]);
        nlohmann::json e;
        e["id"] = b.id;
        e["lo"] = b.lo;
        e["hi"] = b.hi;
        // cores as half-open runs of atom ids
        nlohmann::json runs = nlohmann::json::array();
        const auto& c = f.cores[k];
        for (size_t i = 0; i < c.size();) {
            size_t j2 = i + 1;
            while (j2 < c.size() && c[j2] == c[j2 - 1] + 1) ++j2;
            runs.push_back({c[i], c[j2 - 1] + 1});
            i = j2;
        }
        e["core"] = runs;
        balls.push_back(e);
    }
    j["balls"] = balls;
    return j;
}

nlohmann::json to_json(const BallBasis& basis, const DominationResult& r) {
    nlohmann::json j;
    j["s1"] = to_json(basis, r.s1);
    j["s2"] = to_json(basis, r.s2);
    j["lambda_used"] = r.lambda_used;
    j["cT"] = r.cT;
    j["gamma_norm_used"] = r.gamma_norm_used;
    j["gamma_raises"] = r.gamma_raises;
    j["pointwise_constant"] = std::isfinite(r.pointwise_constant) ? nlohmann::json(r.pointwise_constant) : nlohmann::json("inf");
    j["coverage"] = r.coverage;
    j["generation_counts"] = r.generation_counts;
    j["max_depth"] = r.max_depth;
    j["tree_size"] = r.tree_size;
    j["bad_count"] = r.bad_count;
    j["fkfk_ok"] = r.fkfk_ok;
    j["fkfk_worst"] = r.fkfk_worst;
    j["level_gap_min"] = r.level_gap_min;
    j["gafb_constant"] = r.gafb_constant;
    j["sparse_eta_required"] = r.sparse_eta_required;
    j["s1_ok"] = r.s1_ok;
    j["s2_ok"] = r.s2_ok;
    j["aborted"] = r.aborted;
    j["abort_reason"] = r.abort_reason;
    return j;
}

}  // namespace sparselab
