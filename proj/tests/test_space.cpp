#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "sparselab/space.hpp"

using namespace sparselab;

namespace {

std::vector<double> equal(int n) { return std::vector<double>(static_cast<size_t>(n), 1.0 / n); }

double mass(const std::vector<double>& m, int lo, int hi) {
    double s = 0;
    for (int i = lo; i < hi; ++i) s += m[static_cast<size_t>(i)];
    return s;
}

// hull by climbing the dyadic tree while the next cell has mass <= 2 mu(B)
std::pair<int, int> dyadic_hull_oracle(const std::vector<double>& m, int lo, int hi) {
    const int n = static_cast<int>(m.size());
    const double mb = mass(m, lo, hi);
    int clo = lo, chi = hi;
    while (chi - clo < n) {
        int len = 2 * (chi - clo);
        int plo = clo / len * len;
        if (mass(m, plo, plo + len) > 2 * mb) break;
        clo = plo;
        chi = plo + len;
    }
    return {clo, chi};
}

// exhaustive B4 on a 1D basis: every B' meeting B with mu(B') <= 2 mu(B) lies in B*, and mu(B*) <= c0 mu(B)
bool b4_oracle(const BallBasis& b, double c0) {
    for (const Ball& x : b.balls) {
        const Ball& h = b.ball(b.hull[static_cast<size_t>(x.id)]);
        if (h.measure > c0 * x.measure * (1 + 1e-12)) return false;
        for (const Ball& y : b.balls)
            if (y.intersects(x) && y.measure <= 2 * x.measure * (1 + 1e-12) && !h.contains(y)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("dyadic depth 3 equal masses") {
    BallBasis b = build_dyadic_basis(3, equal(8));
    CHECK(b.size() == 15);
    CHECK(b.root >= 0);
    for (const Ball& x : b.balls) {
        if (x.id == b.root) {
            CHECK(b.hull[static_cast<size_t>(x.id)] == b.root);
            continue;
        }
        CHECK(b.hull[static_cast<size_t>(x.id)] == b.parent[static_cast<size_t>(x.id)]);
    }
    AxiomReport r = verify_axioms(b);
    CHECK(r.all_pass());
    CHECK(r.effective_c0 == 2.0);
    CHECK_FALSE(r.has_witness());
}

TEST_CASE("dyadic two atoms: hull of a half is the root") {
    BallBasis b = build_dyadic_basis(1, {1.0, 1.0});
    int half = b.find_interval(0, 1);
    CHECK(b.hull[static_cast<size_t>(half)] == b.root);
    CHECK(b.ball(b.root).measure == doctest::Approx(2 * b.ball(half).measure));
}

TEST_CASE("dyadic unequal masses follow the climbing rule") {
    std::vector<double> m = {1, 1, 1, 1, 1, 1, 1, 9};
    BallBasis b = build_dyadic_basis(3, m);
    CHECK(b.hull[static_cast<size_t>(b.find_interval(7, 8))] == b.root);
    for (const Ball& x : b.balls) {
        auto [lo, hi] = dyadic_hull_oracle(m, x.lo[0], x.hi[0]);
        const Ball& h = b.ball(b.hull[static_cast<size_t>(x.id)]);
        CHECK(h.lo[0] == lo);
        CHECK(h.hi[0] == hi);
    }
}

TEST_CASE("dyadic hull oracle on random masses") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> m(32);
        for (auto& v : m) v = u(rng);
        BallBasis b = build_dyadic_basis(5, m);
        for (const Ball& x : b.balls) {
            auto [lo, hi] = dyadic_hull_oracle(m, x.lo[0], x.hi[0]);
            const Ball& h = b.ball(b.hull[static_cast<size_t>(x.id)]);
            REQUIRE(h.lo[0] == lo);
            REQUIRE(h.hi[0] == hi);
        }
    }
}

TEST_CASE("two trees without a root break B2") {
    BallBasis b = build_dyadic_basis(3, equal(8), false);
    AxiomReport r = verify_axioms(b);
    CHECK_FALSE(r.b2_pass);
    CHECK(r.witness_atoms.size() == 2);
}

TEST_CASE("interval basis: dilation windows") {
    BallBasis b = build_interval_basis(4, equal(4), 5.0);
    int a = b.find_interval(1, 2);
    const Ball& h = b.ball(b.hull[static_cast<size_t>(a)]);
    CHECK(h.lo[0] == 0);
    CHECK(h.hi[0] == 4);
    BallBasis big = build_interval_basis(64, equal(64), 5.0);
    int edge = big.find_interval(0, 1);
    // iterating the map clips after each dilation
    auto dil = [](int lo, int hi) {
        double c = 0.5 * (lo + hi), h = 2.5 * (hi - lo);
        return std::pair<int, int>(std::max(0, static_cast<int>(std::floor(c - h + 1e-9))), std::min(64, static_cast<int>(std::ceil(c + h - 1e-9))));
    };
    auto w1 = dil(0, 1);
    auto w2 = dil(w1.first, w1.second);
    CHECK(w1 == std::pair<int, int>(0, 3));
    CHECK(w2 == std::pair<int, int>(0, 9));
    CHECK(hull_power(big, edge, 1) == big.find_interval(w1.first, w1.second));
    CHECK(hull_power(big, edge, 2) == big.find_interval(w2.first, w2.second));
    int mid = big.find_interval(30, 31);
    CHECK(hull_power(big, mid, 2) == big.find_interval(18, 43));
}

TEST_CASE("interval basis kappa 5 passes, kappa 2 fails B4 with a witness") {
    BallBasis b5 = build_interval_basis(8, equal(8), 5.0);
    CHECK(b5.size() == 36);
    AxiomReport r5 = verify_axioms(b5);
    CHECK(r5.b4_pass);
    CHECK(r5.effective_c0 <= 5.0);
    CHECK(b4_oracle(b5, 5.0));

    BallBasis b2 = build_interval_basis(8, equal(8), 2.0);
    CHECK(b2.kappa_warning);
    AxiomReport r2 = verify_axioms(b2);
    CHECK_FALSE(r2.b4_pass);
    CHECK_FALSE(b4_oracle(b2, 2.0));
    REQUIRE(r2.witness_balls.size() >= 2);
    const Ball& B = b2.ball(r2.witness_balls[0]);
    const Ball& Bp = b2.ball(r2.witness_balls[1]);
    CHECK(Bp.intersects(B));
    CHECK(Bp.measure <= 2 * B.measure * (1 + 1e-12));
    CHECK_FALSE(b2.ball(b2.hull[static_cast<size_t>(B.id)]).contains(Bp));

    AxiomReport r16 = verify_axioms(build_interval_basis(16, equal(16), 5.0));
    CHECK(r16.all_pass());
}

TEST_CASE("rect2d candidate") {
    AxiomReport r4 = verify_axioms(build_rect2d_candidate(4));
    CHECK_FALSE(r4.b4_pass);
    CHECK(r4.has_witness());
    AxiomReport r2 = verify_axioms(build_rect2d_candidate(2));
    CHECK(r2.b4_pass);
    AxiomReport r8 = verify_axioms(build_rect2d_candidate(8));
    CHECK(r8.effective_c0 > r4.effective_c0);
}

TEST_CASE("hull_power on the dyadic tree") {
    BallBasis b = build_dyadic_basis(4, equal(16));
    int atom = b.find_interval(5, 6);
    CHECK(hull_power(b, atom, 0) == atom);
    CHECK(hull_power(b, atom, 3) == b.find_interval(0, 8));
    CHECK(hull_power(b, atom, 9) == b.root);
}

TEST_CASE("property: hull iteration bound") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    std::vector<double> m(64);
    for (auto& v : m) v = u(rng);
    for (const BallBasis& b : {build_dyadic_basis(6, equal(64)), build_dyadic_basis(6, m), build_interval_basis(40, equal(40), 5.0)}) {
        AxiomReport r = verify_axioms(b);
        REQUIRE(r.b4_pass);
        // the dyadic hull map is the optimal one, so its constant is the effective one
        const double c = b.kind == BasisKind::all_intervals ? b.c0 : r.effective_c0;
        for (const Ball& x : b.balls)
            for (int k = 0; k <= 5; ++k)
                REQUIRE(b.ball(hull_power(b, x.id, k)).measure <= std::pow(c, k) * x.measure * (1 + 1e-12));
    }
}

TEST_CASE("cover_measurable") {
    BallBasis b = build_dyadic_basis(4, equal(16));
    std::vector<char> one(16, 0);
    one[3] = 1;
    auto c1 = cover_measurable(b, one);
    CHECK(c1.balls.size() == 1);
    CHECK(c1.ratio == doctest::Approx(1.0));

    std::vector<char> half(16, 0);
    for (int i = 0; i < 8; ++i) half[static_cast<size_t>(i)] = 1;
    auto c2 = cover_measurable(b, half);
    REQUIRE(c2.balls.size() == 1);
    CHECK(c2.balls[0] == b.find_interval(0, 8));

    std::vector<char> three(16, 0);
    three[0] = three[1] = three[2] = 1;
    auto c3 = cover_measurable(b, three);
    CHECK(c3.ratio <= 2.0);
    CHECK(c3.within_budget);
}

TEST_CASE("property: covers hold the budget and cover the set") {
    std::mt19937_64 rng(9);
    for (const BallBasis& b : {build_dyadic_basis(6, equal(64)), build_interval_basis(48, equal(48), 5.0)}) {
        const double c0 = verify_axioms(b).effective_c0;
        const int n = b.space.size();
        for (int t = 0; t < 40; ++t) {
            std::vector<char> e(static_cast<size_t>(n), 0);
            std::bernoulli_distribution coin(0.05 + 0.02 * (t % 10));
            for (auto& v : e) v = coin(rng);
            auto c = cover_measurable(b, e);
            if (c.balls.empty()) continue;
            double sum = 0;
            std::vector<char> cov(static_cast<size_t>(n), 0);
            for (int id : c.balls) {
                sum += b.ball(id).measure;
                for (int i = b.ball(id).lo[0]; i < b.ball(id).hi[0]; ++i) cov[static_cast<size_t>(i)] = 1;
            }
            double me = 0;
            for (int i = 0; i < n; ++i) {
                if (e[static_cast<size_t>(i)]) {
                    REQUIRE(cov[static_cast<size_t>(i)]);
                    me += b.space.masses[static_cast<size_t>(i)];
                }
            }
            REQUIRE(sum <= 2 * c0 * me * (1 + 1e-12));
        }
    }
}

TEST_CASE("besicovitch subfamilies") {
    BallBasis b = build_dyadic_basis(3, equal(8));
    std::vector<int> chain = {b.find_interval(0, 1), b.find_interval(0, 2), b.find_interval(0, 4)};
    auto r = besicovitch_subfamily(b, chain);
    CHECK(r.subfamily == std::vector<int>{b.find_interval(0, 4)});
    CHECK(r.n0 == 1);

    std::vector<int> atoms_root = {b.root};
    for (int i = 0; i < 8; ++i) atoms_root.push_back(b.find_interval(i, i + 1));
    auto r2 = besicovitch_subfamily(b, atoms_root);
    CHECK(r2.subfamily == std::vector<int>{b.root});
    CHECK(r2.n0 == 1);

    BallBasis iv = build_interval_basis(8, equal(8), 5.0);
    std::vector<int> fam = {iv.find_interval(0, 3), iv.find_interval(2, 5), iv.find_interval(4, 7)};
    auto r3 = besicovitch_subfamily(iv, fam);
    CHECK(r3.n0 == 2);
    CHECK(overlap_count(iv, fam) == 2);
}

TEST_CASE("property: besicovitch keeps the union and never adds overlap") {
    std::mt19937_64 rng(4);
    BallBasis b = build_interval_basis(24, equal(24), 5.0);
    std::uniform_int_distribution<int> pick(0, b.size() - 1);
    for (int t = 0; t < 50; ++t) {
        std::vector<int> fam;
        for (int k = 0; k < 6; ++k) fam.push_back(pick(rng));
        auto r = besicovitch_subfamily(b, fam);
        std::vector<char> u1(24, 0), u2(24, 0);
        for (int id : fam)
            for (int i = b.ball(id).lo[0]; i < b.ball(id).hi[0]; ++i) u1[static_cast<size_t>(i)] = 1;
        for (int id : r.subfamily)
            for (int i = b.ball(id).lo[0]; i < b.ball(id).hi[0]; ++i) u2[static_cast<size_t>(i)] = 1;
        REQUIRE(u1 == u2);
        REQUIRE(r.n0 <= overlap_count(b, fam));
        REQUIRE(r.n0 == overlap_count(b, r.subfamily));
    }
}

TEST_CASE("property: B4 restatement on verified bases") {
    for (const BallBasis& b : {build_dyadic_basis(5, equal(32)), build_interval_basis(20, equal(20), 5.0)}) {
        AxiomReport r = verify_axioms(b);
        REQUIRE(r.all_pass());
        CHECK(b4_oracle(b, b.c0));
    }
}

TEST_CASE("refined dyadic basis") {
    BallBasis b = build_refined_dyadic_basis(40);
    CHECK(b.space.size() == 41);
    CHECK(b.space.total_mass == doctest::Approx(1.0));
    AxiomReport r = verify_axioms(b);
    CHECK(r.all_pass());
    CHECK(r.effective_c0 == doctest::Approx(2.0));
    CHECK_THROWS(build_refined_dyadic_basis(0));
}

TEST_CASE("basis json round trip") {
    for (const BallBasis& b : {build_dyadic_basis(4, equal(16)), build_interval_basis(10, equal(10), 5.0), build_rect2d_candidate(3)}) {
        BallBasis c = basis_from_json(basis_to_json(b));
        REQUIRE(c.size() == b.size());
        CHECK(c.hull == b.hull);
        CHECK(c.c0 == b.c0);
        for (int i = 0; i < b.size(); ++i) CHECK(c.ball(i).same_extent(b.ball(i)));
    }
}
