#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sparselab/sparse.hpp"
#include "sparselab/weights.hpp"

namespace sparselab {

// -log P ~ (gamma t)^beta, fitted on log(-log P) against log t
struct DecayFit {
    double gamma = 0.0;
    double beta = 0.0;
    double r2 = 0.0;
    int points = 0;
};
DecayFit fit_stretched_exponential(const std::vector<double>& t, const std::vector<double>& p);

struct DecayCurve {
    std::vector<double> t_grid;
    std::vector<double> p_of_t;
    DecayFit fit;
    int trials = 0;
    long excluded_atoms = 0;
    long counted_atoms = 0;
};

// trials run in parallel; the pooled result does not depend on `threads`
DecayCurve decay_experiment(const Operator& op, int ball, int trials, const std::vector<double>& t_grid, std::uint64_t seed,
                            const CommutatorData* comm = nullptr, int threads = 1);

// M^{ceil r}(|f|^r)^{1/r}
GridFunction iterated_maximal(const BallBasis& basis, const GridFunction& f, double r);
// sup over balls containing x of the Luxemburg norm on the ball
GridFunction orlicz_maximal(const BallBasis& basis, const GridFunction& f, const OrliczSpec& phi);

struct MixedWeakReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    double w_a1 = 0.0;
    double v_ainf = 0.0;      // Fujii-Wilson constant of v^{r/m}
    bool certified = true;
};
MixedWeakReport mixed_weak_experiment(const Operator& op, const WeightRecord& w, const WeightRecord& v, const std::vector<GridFunction>& fs,
                                      double cert_cap = 1e6);

// Global ratio ||T f||_{L^p(w)} / ||M_r f||_{L^p(w)}; with b0 >= 0 the local L^1(B0, w) against L^1(B0^(3), w) ratio.
// With commutator data the local majorant is the L(log L)^r maximal function.
double coifman_fefferman(const Operator& op, const std::vector<GridFunction>& fs, const WeightRecord& w, double p, int b0 = -1,
                         const CommutatorData* comm = nullptr);

struct NFactors {
    double n1 = 0.0;
    double w_factor = 1.0;               // ||M_w||_{L^{p'}(w)}, 1 when p <= 1
    double sigma_part = 1.0;             // prod ||M_{sigma_i}||^{1/r_i}
    std::map<std::vector<int>, double> n2;
};
NFactors n_factors(const MultiWeight& mw, const BallBasis& basis, int trials, std::uint64_t seed);

// randomized lower bound of ||M_{B,u}||_{L^q(u)}
double weighted_maximal_norm(const WeightRecord& u, double q, const BallBasis& basis, int trials, std::uint64_t seed);

using MultiOperator = std::function<GridFunction(const std::vector<GridFunction>&)>;
using WeightFamily = std::function<MultiWeight(double)>;

struct ScanOptions {
    int trials = 16;
    std::uint64_t seed = 1;
    bool with_n_factors = false;
    int threads = 1;
};

struct SharpnessScan {
    std::vector<double> params;
    std::vector<double> characteristic;      // [w]_{A_{p/r}} multilinear form
    std::vector<double> classical;           // m = 1: classical [w]_{A_{p/r}}
    std::vector<double> norm_estimates;      // lower bounds
    std::vector<double> normalized;          // norm / characteristic^target
    std::vector<double> n1;
    double target_exponent = 0.0;
    double slope = 0.0;                      // log norm vs log characteristic
    double classical_slope = 0.0;            // m = 1 only
    double buckley_exponent = 0.0;           // 1/(p/r - 1), m = 1 only
    double normalized_max = 0.0;
};
SharpnessScan sharpness_scan(const MultiOperator& op, int m, double r, const WeightFamily& family, const std::vector<double>& params,
                             const BallBasis& basis, const ScanOptions& opt);

// power profile |x|^a on the refined dyadic basis: shell averages, innermost atom continues the geometric profile
GridFunction shell_power_weight(const BallBasis& refined, double a);

struct FKReport {
    double bound_sup = 0.0;
    std::vector<double> a_grid, tail_curve;
    std::vector<double> r_grid, osc_curve;
    double p0 = 0.0;
};
FKReport fk_probe(const DiscreteSpace& space, const std::vector<GridFunction>& family, double p, const WeightRecord& w, int x0_atom,
                  const std::vector<double>& a_grid, const std::vector<double>& r_grid, double p0 = 2.0);

// least squares y = slope * x + intercept
struct LinearFit {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

std::string to_csv(const DecayCurve& c);
std::string to_csv(const SharpnessScan& s);
std::string to_csv(const FKReport& r);

}  // namespace sparselab
