#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparselab/functions.hpp"

namespace sparselab {

enum class OpTag { maximal, hilbert, calderon_commutator, lp_square, lacunary_carleson, variation, global_average, custom_kernel };

std::string to_string(OpTag t);
OpTag op_tag_from_string(const std::string& s);

struct OperatorSpec {
    OpTag tag = OpTag::maximal;
    int m = 1;
    double r = 1.0;
    double truncation = 0.0;            // hilbert-type kernels: also drop |x - y| < truncation
    std::vector<double> scales;         // lp_square
    std::string bump = "gaussian";      // lp_square: gaussian | box
    std::vector<double> freqs;          // lacunary_carleson
    double q = 2.0;                     // variation
    std::vector<double> truncations;    // variation, decreasing
    std::vector<double> kernel;         // custom_kernel, dense row-major N x N

    static OperatorSpec maximal(double r = 1.0, int m = 1);
    static OperatorSpec hilbert(double truncation = 0.0);
    static OperatorSpec calderon();
    static OperatorSpec lp_square(std::vector<double> scales, std::string bump = "gaussian");
    static OperatorSpec lacunary_carleson(std::vector<double> freqs);
    static OperatorSpec variation(double q, std::vector<double> truncations);
    static OperatorSpec global_average();
    static OperatorSpec custom_kernel(std::vector<double> table);

    void validate(int n_atoms) const;
    std::string name() const;
};

nlohmann::json to_json(const OperatorSpec& s);
OperatorSpec operator_from_json(const nlohmann::json& j);

struct CommutatorSpec {
    OperatorSpec base;
    std::vector<GridFunction> symbols;
    std::vector<int> alpha;
    int order() const;
    std::vector<int> tau() const;
};

class Operator {
public:
    Operator(OperatorSpec spec, const BallBasis& basis);

    const OperatorSpec& spec() const { return spec_; }
    const BallBasis& basis() const { return *basis_; }
    int arity() const { return spec_.m; }
    double r() const { return spec_.r; }
    bool has_kernel() const { return spec_.tag != OpTag::maximal; }
    int components() const { return ncomp_; }

    GridFunction apply(const std::vector<GridFunction>& fs, const std::vector<char>* where = nullptr) const;
    GridFunction apply_commutator(const CommutatorSpec& c, const std::vector<GridFunction>& fs) const;

    // T_*; `where` restricts the atoms evaluated (others are 0)
    GridFunction grand_maximal(const std::vector<GridFunction>& fs, const std::vector<char>* where = nullptr) const;
    // || T(f 1_outer)(x) - T(f 1_inner)(x) || for x in `at` (at most `cap` evenly spaced atoms, 0 = all);
    // outer/inner are ball ids, -1 means Sigma
    GridFunction truncation_gap(const std::vector<GridFunction>& fs, int outer, int inner, int at, int cap = 0) const;
    // (T f - T(f 1_{hull})) at atoms of ball `b`, sampled pairwise oscillation sup
    double tail_oscillation(const std::vector<GridFunction>& fs, int ball) const;

    // scalar kernel K(x, y) or K(x, y1, y2) on atom indices
    double kernel_value(int x, const std::vector<int>& ys) const;

private:
    OperatorSpec spec_;
    const BallBasis* basis_;
    int n_ = 0;
    int ncomp_ = 1;

    struct Rows;
    void build_rows(const std::vector<GridFunction>& fs, int x, Rows& rows, const CommutatorSpec* c = nullptr) const;
    double comp_norm(const double* v) const;
    std::vector<int> hulls_containing(int x) const;
};

// q-variation of a finite sequence by longest path over the pairwise jump graph
double variation_norm(const std::vector<double>& a, double q);
// exhaustive subsequence enumeration, n <= 20
double variation_norm_bruteforce(const std::vector<double>& a, double q);

GridFunction lacunary_carleson(const BallBasis& basis, const GridFunction& f, const std::vector<double>& freqs);

struct OscillationReport {
    double c1_est = 0.0;
    double c2_est = 0.0;
    int samples = 0;
    int skipped = 0;
    int worst_ball = -1;
    int worst_x = -1, worst_xp = -1;
    std::uint64_t worst_sample = 0;
};

struct SamplingOptions {
    int n_samples = 16;
    std::uint64_t seed = 1;
    int threads = 1;
    int max_balls = 64;      // balls visited per sample for the estimators
};

OscillationReport estimate_oscillation(const Operator& op, const SamplingOptions& opt);

// Empirical L^r x ... x L^r -> L^{r/m,infty} norm over random unit inputs.
double estimate_weak_norm(const Operator& op, const SamplingOptions& opt);

// Delta(A, B) over shared samples; returns one value per (A, B) pair.
double delta(const Operator& op, int A, int B, const SamplingOptions& opt, const std::vector<std::vector<GridFunction>>* extra = nullptr);
// Matched pair: (Delta(A,B), Delta(A,C)) where C's sample set includes f 1_{B*}.
std::pair<double, double> delta_matched(const Operator& op, int A, int B, int C, const SamplingOptions& opt);

struct OperatorConstants {
    double c1 = 0.0, c2 = 0.0, weak_norm = 0.0;
    double total() const { return c1 + c2 + weak_norm; }
};
OperatorConstants estimate_constants(const Operator& op, const SamplingOptions& opt);

// max{|T f|, T_* f, cT * prod M_r f_i}
GridFunction gamma_majorant(const Operator& op, const std::vector<GridFunction>& fs, double cT, const std::vector<char>* where = nullptr);

}  // namespace sparselab
