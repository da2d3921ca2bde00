#pragma once

#include <vector>

#include "sparselab/space.hpp"

namespace sparselab {

using GridFunction = std::vector<double>;

// Per-atom finite real sequence with an aggregation norm.
struct VectorFunction {
    enum class Norm { sup, l2, sup_pairs };
    int n_atoms = 0;
    int n_index = 0;
    std::vector<double> values;   // row-major: atom * n_index + index
    Norm norm_tag = Norm::sup;
    std::vector<double> l2_weights;

    VectorFunction() = default;
    VectorFunction(int atoms, int index, Norm tag) : n_atoms(atoms), n_index(index), values(static_cast<size_t>(atoms) * index, 0.0), norm_tag(tag) {}
    double& at(int atom, int k) { return values[static_cast<size_t>(atom) * n_index + k]; }
    double at(int atom, int k) const { return values[static_cast<size_t>(atom) * n_index + k]; }
    double norm(int atom) const;
    double distance(int atom, const VectorFunction& other, int other_atom) const;
    GridFunction norms() const;
};

enum class OrliczKind { power, llogl, expl };

struct OrliczSpec {
    OrliczKind kind = OrliczKind::power;
    double param = 1.0;
    static OrliczSpec power(double p);
    static OrliczSpec llogl(double s);
    static OrliczSpec expl(double s);
    double phi(double t) const;
};

// Prefix integrals of values * mu, O(1) integral over any ball.
class Integrator {
public:
    Integrator(const DiscreteSpace& space, const std::vector<double>& values);
    double over(const Ball& b) const;
    double over(int lo, int hi) const { return p_[static_cast<size_t>(hi)] - p_[static_cast<size_t>(lo)]; }

private:
    int dim_ = 1;
    int w_ = 0;
    std::vector<double> p_;
};

double integral(const DiscreteSpace& space, const GridFunction& f);
double lp_norm(const DiscreteSpace& space, const GridFunction& f, double p, const GridFunction* weight = nullptr);

double ball_average(const BallBasis& basis, const GridFunction& f, int ball, double r = 1.0);
double super_average(const BallBasis& basis, const GridFunction& f, int ball, double r = 1.0);
double luxemburg_norm(const BallBasis& basis, const GridFunction& f, int ball, const OrliczSpec& phi, double tol = 1e-10);
double bmo_norm(const BallBasis& basis, const GridFunction& f);
double osc_expl_norm(const BallBasis& basis, const GridFunction& f, double s, double tol = 1e-10);
// L^{p,infty} quasi-norm with respect to per-atom measure sigma (empty: atom masses)
double weak_norm(const GridFunction& g, double p, const std::vector<double>& sigma);
GridFunction ball_average_function(const DiscreteSpace& space, const GridFunction& f, double radius);

// Pointwise sup over balls containing each atom of per-ball values.
GridFunction sup_over_containing(const BallBasis& basis, const std::vector<double>& per_ball);

GridFunction maximal(const BallBasis& basis, const GridFunction& f, double r = 1.0);
// sup over B containing x of prod_i <f_i>_{B,r}
GridFunction maximal_multi(const BallBasis& basis, const std::vector<GridFunction>& fs, double r = 1.0);
// prod_i M_{B,r} f_i
GridFunction maximal_tensor(const BallBasis& basis, const std::vector<GridFunction>& fs, double r = 1.0);
// sup over B containing x of mu(B)^{-1} int_B |f| * g, i.e. M(f 1_S) when g is an indicator
GridFunction maximal_restricted(const BallBasis& basis, const GridFunction& f, const std::vector<char>& support);

GridFunction restrict_to(const BallBasis& basis, const GridFunction& f, int ball);
std::vector<char> ball_mask(const BallBasis& basis, int ball);

}  // namespace sparselab
