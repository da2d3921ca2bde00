#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sparselab/random.hpp"
#include "sparselab/sparse.hpp"

using namespace sparselab;

namespace {

std::vector<double> equal(int n) { return std::vector<double>(static_cast<size_t>(n), 1.0 / n); }

std::vector<int> range(int lo, int hi) {
    std::vector<int> v;
    for (int i = lo; i < hi; ++i) v.push_back(i);
    return v;
}

GridFunction dense_sparse(const BallBasis& b, const std::vector<GridFunction>& fs, const std::vector<int>& balls, double r) {
    GridFunction out(static_cast<size_t>(b.space.size()), 0.0);
    for (int id : balls) {
        const Ball& x = b.ball(id);
        double prod = 1;
        for (const auto& f : fs) {
            double s = 0;
            for (int i = x.lo[0]; i < x.hi[0]; ++i) s += std::pow(std::abs(f[static_cast<size_t>(i)]), r) * b.space.masses[static_cast<size_t>(i)];
            prod *= std::pow(s / x.measure, 1 / r);
        }
        for (int y = 0; y < b.space.size(); ++y)
            if (y >= x.lo[0] && y < x.hi[0]) out[static_cast<size_t>(y)] += prod;
    }
    return out;
}

}  // namespace

TEST_CASE("verify_sparse") {
    BallBasis b = build_dyadic_basis(2, equal(4));
    SparseFamily one{{b.root}, {range(0, 4)}, 1.0};
    CHECK(verify_sparse(b, one, 1.0).ok);

    // Sigma, halves, quarters with E_B = B minus its selected children
    SparseFamily chain;
    chain.balls = {b.root, b.find_interval(0, 2), b.find_interval(0, 1)};
    chain.cores = {range(2, 4), {1}, {0}};
    CHECK(verify_sparse(b, chain, 0.5).ok);
    CHECK_FALSE(verify_sparse(b, chain, 0.6).ok);

    SparseFamily twin{{b.root, b.root}, {range(0, 4), range(0, 4)}, 1.0};
    auto c = verify_sparse(b, twin, 0.1);
    CHECK_FALSE(c.ok);
    CHECK(c.witness_b >= 0);

    SparseFamily outside{{b.find_interval(0, 2)}, {{3}}, 1.0};
    CHECK_FALSE(verify_sparse(b, outside, 0.1).ok);
}

TEST_CASE("carve_cores") {
    BallBasis b = build_dyadic_basis(3, equal(8));
    auto d = carve_cores(b, {b.find_interval(0, 2), b.find_interval(4, 8)});
    CHECK(d.eta == doctest::Approx(1));

    int half = b.find_interval(0, 4);
    auto s = carve_cores(b, {b.root, half});
    CHECK(s.eta == doctest::Approx(0.5));
    CHECK(s.cores[0] == range(4, 8));
    CHECK(s.cores[1] == range(0, 4));
    auto l = carve_cores(b, {b.root, half}, false);
    CHECK(l.eta == 0);
    CHECK(l.cores[1].empty());
    CHECK(verify_sparse(b, s, 0.5).ok);
}

TEST_CASE("eval_sparse") {
    BallBasis b = build_dyadic_basis(3, equal(8));
    SparseFamily s{{b.root}, {range(0, 8)}, 1.0};
    for (double v : eval_sparse(b, {GridFunction(8, 1.0)}, s, {1})) CHECK(v == doctest::Approx(1));
    SparseFamily two{{b.root, b.find_interval(0, 4)}, {range(4, 8), range(0, 4)}, 0.5};
    GridFunction e = eval_sparse(b, {GridFunction(8, 1.0)}, two, {1});
    for (int i = 0; i < 8; ++i) CHECK(e[static_cast<size_t>(i)] == doctest::Approx(i < 4 ? 2 : 1));

    BallBasis big = build_dyadic_basis(6, equal(64));
    std::mt19937_64 rng(21);
    std::vector<int> balls;
    std::uniform_int_distribution<int> pick(0, big.size() - 1);
    for (int k = 0; k < 20; ++k) balls.push_back(pick(rng));
    SparseFamily fam = carve_cores(big, balls);
    GridFunction f = random_function(Recipe::noise, big.space, rng), g = random_function(Recipe::bumps, big.space, rng);
    for (double r : {1.0, 2.0}) {
        GridFunction got = eval_sparse(big, {f, g}, fam, {r, r}), want = dense_sparse(big, {f, g}, balls, r);
        for (size_t i = 0; i < 64; ++i) REQUIRE(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("eval_sparse_commutator") {
    BallBasis b = build_dyadic_basis(4, equal(16));
    std::mt19937_64 rng(5);
    GridFunction f = random_function(Recipe::noise, b.space, rng), x(16);
    for (int i = 0; i < 16; ++i) x[static_cast<size_t>(i)] = b.space.coord(i);
    SparseFamily s = carve_cores(b, {b.root, b.find_interval(0, 8), b.find_interval(4, 6)});
    GridFunction plain = eval_sparse(b, {f}, s, {1}), none = eval_sparse_commutator(b, {f}, {x}, {}, {}, s, {1});
    for (size_t i = 0; i < 16; ++i) CHECK(none[i] == doctest::Approx(plain[i]));
    for (double v : eval_sparse_commutator(b, {f}, {GridFunction(16, 2.0)}, {0}, {}, s, {1})) CHECK(v == 0);
    for (double v : eval_sparse_commutator(b, {f}, {GridFunction(16, 2.0)}, {}, {0}, s, {1})) CHECK(v == 0);

    SparseFamily root{{b.root}, {range(0, 16)}, 1.0};
    GridFunction got = eval_sparse_commutator(b, {f}, {x}, {0}, {}, root, {1});
    double fa = 0;
    for (double v : f) fa += std::abs(v) / 16;
    for (int i = 0; i < 16; ++i) CHECK(got[static_cast<size_t>(i)] == doctest::Approx(std::abs(x[static_cast<size_t>(i)] - 0.5) * fa));
    CHECK_THROWS(eval_sparse_commutator(b, {f}, {x}, {0}, {0}, root, {1}));
}

TEST_CASE("domination of the global average") {
    BallBasis b = build_dyadic_basis(6, equal(64));
    Operator op(OperatorSpec::global_average(), b);
    std::vector<GridFunction> fs = {GridFunction(64, 1.0)};
    DominationOptions opt;
    auto res = construct_domination(op, fs, b.root, opt);
    REQUIRE_FALSE(res.aborted);
    double k = verify_pointwise_domination(op, fs, b.root, res);
    CHECK(k <= 1 + 1e-12);
    CHECK(res.s1_ok);
    CHECK(res.s2_ok);
    CHECK(verify_sparse(b, res.s1, 1 / (2 * std::pow(b.c0, 3))).ok);
    CHECK(verify_sparse(b, res.s2, 1 / (2 * std::pow(b.c0, 3))).ok);
    GridFunction den = eval_sparse(b, fs, res.s1, {1});
    GridFunction d2 = eval_sparse(b, fs, res.s2, {1});
    for (size_t i = 0; i < 64; ++i) CHECK(den[i] + d2[i] >= 1 - 1e-12);
}

TEST_CASE("maximal function domination at N=1024") {
    BallBasis b = build_dyadic_basis(10, equal(1024));
    Operator op(OperatorSpec::maximal(), b);
    DominationOptions opt;
    opt.sampling.n_samples = 8;
    const double eta = 1 / (2 * std::pow(b.c0, 3));
    for (std::uint64_t k = 0; k < 4; ++k) {
        std::vector<GridFunction> fs = {corpus_function(Recipe::mixed, b.space, 7, k)};
        auto res = construct_domination(op, fs, b.root, opt);
        REQUIRE_FALSE(res.aborted);
        double c = verify_pointwise_domination(op, fs, b.root, res);
        CHECK(std::isfinite(c));
        CHECK(verify_sparse(b, res.s1, eta).ok);
        CHECK(verify_sparse(b, res.s2, eta).ok);
        CHECK(res.fkfk_ok);
        CHECK(res.fkfk_worst <= 1 + 1e-12);
        CHECK(res.lambda_used == doctest::Approx(4 * std::pow(b.c0, 6)));
    }
}

TEST_CASE("lambda below the floor is rejected") {
    BallBasis b = build_dyadic_basis(4, equal(16));
    Operator op(OperatorSpec::maximal(), b);
    DominationOptions opt;
    opt.lambda = 3 * std::pow(b.c0, 6);
    CHECK_THROWS(construct_domination(op, {GridFunction(16, 1.0)}, b.root, opt));
}

TEST_CASE("commutator domination with constant symbols reduces to the plain one") {
    BallBasis b = build_dyadic_basis(7, equal(128));
    Operator op(OperatorSpec::hilbert(), b);
    std::vector<GridFunction> fs = {corpus_function(Recipe::mixed, b.space, 3, 1)};
    DominationOptions opt;
    opt.sampling.n_samples = 6;
    auto res = construct_domination(op, fs, b.root, opt);
    REQUIRE_FALSE(res.aborted);
    double plain = verify_pointwise_domination(op, fs, b.root, res);
    CommutatorData cd{{GridFunction(128, 4.0)}, {0}};
    CHECK(verify_pointwise_domination(op, fs, b.root, res, &cd) == plain);
    CHECK(std::isfinite(plain));
}

TEST_CASE("levels and chains") {
    BallBasis b = build_dyadic_basis(4, equal(16));
    CHECK(level_of(b, b.root) == 0);
    CHECK(level_of(b, b.find_interval(0, 1)) == static_cast<int>(std::floor(0.5 * std::log(1.0 / 16) / std::log(2.0))));
    int q = b.find_interval(4, 8);
    int nx = chain_next(b, q);
    CHECK(b.ball(nx).contains(b.ball(q)));
    CHECK(b.ball(nx).measure > b.ball(q).measure);
}

TEST_CASE("json export") {
    BallBasis b = build_dyadic_basis(3, equal(8));
    auto s = carve_cores(b, {b.root, b.find_interval(0, 4)});
    auto j = to_json(b, s);
    CHECK(j.at("balls").size() == 2);
}
