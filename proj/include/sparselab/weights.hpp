#pragma once

#include <string>
#include <vector>

#include "sparselab/functions.hpp"

namespace sparselab {

// Strictly positive weight on the atoms.
struct WeightRecord {
    GridFunction w;
    WeightRecord() = default;
    explicit WeightRecord(GridFunction values);
    GridFunction power(double e) const;
};

struct MuckenhouptReport {
    double p = 1.0;
    double constant = 1.0;
    int extremal_ball = -1;
};

MuckenhouptReport ap_constant(const WeightRecord& w, double p, const BallBasis& basis);
// s = +infinity selects the RH_infty characteristic
double rh_constant(const WeightRecord& w, double s, const BallBasis& basis);

struct AinfConstants {
    double exp_log = 1.0;
    double fujii = 1.0;
};
AinfConstants ainf_constants(const WeightRecord& w, const BallBasis& basis);

struct MultiWeight {
    std::vector<WeightRecord> components;
    std::vector<double> p;
    std::vector<double> r;
    MultiWeight(std::vector<WeightRecord> ws, std::vector<double> ps, std::vector<double> rs = {});
    int m() const { return static_cast<int>(components.size()); }
    double p_total() const;
    WeightRecord product() const;          // w = prod w_i^{p/p_i}
    WeightRecord sigma(int i) const;       // w_i^{r_i/(r_i-p_i)}
};

double multilinear_ap_constant(const MultiWeight& mw, const BallBasis& basis);

struct CoifmanRochbergResult {
    double constant = 0.0;
    std::vector<int> excluded_atoms;
};
CoifmanRochbergResult coifman_rochberg(const std::vector<GridFunction>& fs, double delta, const BallBasis& basis);

GridFunction weighted_maximal(const GridFunction& f, const WeightRecord& w, const BallBasis& basis);

struct RdFResult {
    GridFunction rh;
    int terms = 0;
    double m_norm = 0.0;         // surrogate operator norm used in the series
    bool dominates = true;       // h <= Rh
    double norm_ratio = 0.0;     // ||Rh||_s / ||h||_s
    double a1_constant = 0.0;    // [Rh]_{A_1}
    bool pass = true;
    std::string defect;
};
RdFResult rubio_de_francia(const GridFunction& h, double s, const BallBasis& basis, double tail_tol = 1e-12);

GridFunction sawyer_S(const GridFunction& f, const WeightRecord& w, const BallBasis& basis);

struct SawyerRResult {
    GridFunction rh;
    int terms = 0;
    double max_ratio = 0.0;      // max of S(Rh) / (2K Rh)
    bool pass = true;
};
SawyerRResult sawyer_R(const GridFunction& h, const WeightRecord& w, double K, const BallBasis& basis, double tail_tol = 1e-12);

}  // namespace sparselab
