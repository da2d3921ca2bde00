#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparselab/operators.hpp"

namespace sparselab {

// Ball list with one core (sorted atom ids) per entry; entries may repeat a ball.
struct SparseFamily {
    std::vector<int> balls;
    std::vector<std::vector<int>> cores;
    double eta = 0.0;    // min mu(E_B)/mu(B) achieved
    size_t size() const { return balls.size(); }
};

struct SparseCheck {
    bool ok = true;
    double min_ratio = 1.0;
    int witness_a = -1;      // entry index
    int witness_b = -1;      // second entry for overlapping cores
    int witness_atom = -1;
    std::string note;
};

SparseCheck verify_sparse(const BallBasis& basis, const SparseFamily& family, double eta);
SparseFamily carve_cores(const BallBasis& basis, const std::vector<int>& balls, bool smallest_first = true);

GridFunction eval_sparse(const BallBasis& basis, const std::vector<GridFunction>& fs, const SparseFamily& family, const std::vector<double>& r);
GridFunction eval_sparse_commutator(const BallBasis& basis, const std::vector<GridFunction>& fs, const std::vector<GridFunction>& bs,
                                    const std::vector<int>& tau1, const std::vector<int>& tau2, const SparseFamily& family,
                                    const std::vector<double>& r);

struct DominationOptions {
    double lambda = 0.0;         // 0 selects 4 c0^6
    double cT = 0.0;             // C(T); 0 means estimate
    double gamma_norm = 0.0;     // ||Gamma||; 0 means estimate
    SamplingOptions sampling;
    int max_generations = 64;
    int max_gamma_raises = 20;
};

struct DominationResult {
    SparseFamily s1, s2;
    double lambda_used = 0.0;
    double cT = 0.0;
    double gamma_norm_used = 0.0;
    int gamma_raises = 0;
    double pointwise_constant = 0.0;
    double coverage = 0.0;
    std::vector<int> generation_counts;
    int max_depth = 0;
    int tree_size = 0;
    int bad_count = 0;              // size of the excluded family before the level split
    bool fkfk_ok = true;
    double fkfk_worst = 0.0;         // max over (B, k) of mu(U F_k(B)) / ((3 c0^2/lambda)^k mu(B))
    double level_gap_min = 0.0;      // min of r(parent) - r(child)
    double gafb_constant = 0.0;      // max Gamma(f 1_{B3}) / (C(T) prod <f>_{B3}) on B* minus lower hulls
    double sparse_eta_required = 0.0;
    bool s1_ok = false, s2_ok = false;
    bool aborted = false;
    std::string abort_reason;
};

// Lemma-level helpers exposed for testing.
int level_of(const BallBasis& basis, int ball);
int chain_next(const BallBasis& basis, int ball);
double estimate_gamma_norm(const Operator& op, double cT, const SamplingOptions& opt);

DominationResult construct_domination(const Operator& op, const std::vector<GridFunction>& fs, int b0, const DominationOptions& opt);

struct CommutatorData {
    std::vector<GridFunction> symbols;
    std::vector<int> alpha;
};

// sup over atoms of B0 of |T f| / (A_{S1} + A_{S2}); +inf where only the numerator is nonzero
double verify_pointwise_domination(const Operator& op, const std::vector<GridFunction>& fs, int b0, DominationResult& result,
                                   const CommutatorData* comm = nullptr);

nlohmann::json to_json(const BallBasis& basis, const SparseFamily& f);
nlohmann::json to_json(const BallBasis& basis, const DominationResult& r);

}  // namespace sparselab
