#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace sparselab {

// Finite atomized measure space on a regular 1D or 2D lattice.
struct DiscreteSpace {
    int dim = 1;
    std::array<int, 2> shape{0, 1};
    std::vector<double> masses;
    double origin = 0.0;
    double cell = 1.0;
    double total_mass = 0.0;

    static DiscreteSpace line(std::vector<double> masses, double origin = 0.0, double cell = -1.0);
    static DiscreteSpace uniform_line(int n, double origin = 0.0, double length = 1.0);
    static DiscreteSpace lattice2d(int n);

    int size() const { return shape[0] * shape[1]; }
    double coord(int i) const { return origin + (i + 0.5) * cell; }
    // prefix[i] = sum of masses of atoms < i (1D), or 2D summed-area table with stride shape[0]+1
    const std::vector<double>& prefix() const { return prefix_; }
    void rebuild();

private:
    std::vector<double> prefix_;
};

// Contiguous index range (1D: lo[1]=0, hi[1]=1) or index box (2D), half open.
struct Ball {
    int id = -1;
    std::array<int, 2> lo{0, 0};
    std::array<int, 2> hi{0, 1};
    double measure = 0.0;

    int atoms() const { return (hi[0] - lo[0]) * (hi[1] - lo[1]); }
    bool contains_atom(int i, int nx) const {
        int x = i % nx, y = i / nx;
        return x >= lo[0] && x < hi[0] && y >= lo[1] && y < hi[1];
    }
    bool contains(const Ball& b) const {
        return lo[0] <= b.lo[0] && b.hi[0] <= hi[0] && lo[1] <= b.lo[1] && b.hi[1] <= hi[1];
    }
    bool intersects(const Ball& b) const {
        return lo[0] < b.hi[0] && b.lo[0] < hi[0] && lo[1] < b.hi[1] && b.lo[1] < hi[1];
    }
    bool same_extent(const Ball& b) const { return lo == b.lo && hi == b.hi; }
};

enum class BasisKind { dyadic_martingale, all_intervals, rect2d_candidate, custom };

std::string to_string(BasisKind k);
BasisKind basis_kind_from_string(const std::string& s);

struct BallBasis {
    DiscreteSpace space;
    std::vector<Ball> balls;
    std::vector<int> hull;
    std::vector<char> saturated;
    double c0 = 2.0;
    BasisKind kind = BasisKind::custom;
    double kappa = 0.0;
    bool kappa_warning = false;
    int depth = 0;
    int root = -1;                 // id of the ball equal to Sigma, -1 if absent
    std::vector<int> parent;       // tree parent for dyadic-structured bases, -1 at tops
    std::vector<int> topdown;      // tree ids ordered parents first

    const Ball& ball(int id) const { return balls[static_cast<size_t>(id)]; }
    int size() const { return static_cast<int>(balls.size()); }
    int find(const std::array<int, 2>& lo, const std::array<int, 2>& hi) const;
    int find_interval(int lo, int hi) const { return find({lo, 0}, {hi, 1}); }
    bool tree_structured() const { return !parent.empty(); }
    // smallest-measure ball containing the atom box; -1 if none
    int smallest_containing(const std::array<int, 2>& lo, const std::array<int, 2>& hi) const;
    // ids of balls containing atom i (tree: leaf-to-top chain; otherwise every such ball)
    std::vector<int> containing(int atom) const;
    // leaf ball of a tree basis for an atom
    int leaf(int atom) const { return leaf_[static_cast<size_t>(atom)]; }

    void index();
    double measure(const std::array<int, 2>& lo, const std::array<int, 2>& hi) const;

private:
    std::unordered_map<std::uint64_t, int> lookup_;
    std::vector<int> leaf_;
};

struct AxiomReport {
    bool b1_pass = true, b2_pass = true, b3_pass = true, b4_pass = true;
    std::vector<int> witness_balls;
    std::vector<int> witness_atoms;
    std::string witness_note;
    double effective_c0 = 1.0;
    bool all_pass() const { return b1_pass && b2_pass && b3_pass && b4_pass; }
    bool has_witness() const { return !witness_balls.empty() || !witness_atoms.empty(); }
};

BallBasis build_dyadic_basis(int depth, const std::vector<double>& masses, bool include_root = true);
// dyadic filtration of [0,1) refined only toward 0: atoms [0,2^-L) and the shells [2^-k-1, 2^-k)
BallBasis build_refined_dyadic_basis(int levels);
BallBasis build_interval_basis(int n, const std::vector<double>& masses, double kappa);
BallBasis build_rect2d_candidate(int n);

AxiomReport verify_axioms(const BallBasis& basis);
int hull_power(const BallBasis& basis, int ball, int k);

struct CoverResult {
    std::vector<int> balls;
    double ratio = 0.0;     // sum of measures / mu(E)
    bool within_budget = true;
};
CoverResult cover_measurable(const BallBasis& basis, const std::vector<char>& in_set);

struct BesicovitchResult {
    std::vector<int> subfamily;
    int n0 = 0;
};
BesicovitchResult besicovitch_subfamily(const BallBasis& basis, const std::vector<int>& family);
int overlap_count(const BallBasis& basis, const std::vector<int>& family);

nlohmann::json basis_to_json(const BallBasis& basis);
BallBasis basis_from_json(const nlohmann::json& j);

}  // namespace sparselab
