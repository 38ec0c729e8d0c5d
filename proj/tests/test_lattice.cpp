#include <gtest/gtest.h>

#include <random>

#include "newtonflow/lattice.hpp"
#include "oracles.hpp"

using namespace newtonflow;

namespace {

void expect_near_c(cplx a, cplx b, double tol) {
    EXPECT_LT(std::abs(a - b), tol) << a << " vs " << b;
}

} // namespace

TEST(Lattice, RejectsDegeneratePeriods) {
    EXPECT_THROW(Lattice(0.0, cplx(0, 1)), InvalidInput);
    EXPECT_THROW(Lattice(1.0, 2.0), InvalidInput);
    EXPECT_THROW(Lattice(cplx(1, 1), cplx(-2, -2)), InvalidInput);
    EXPECT_THROW(Lattice(cplx(std::nan(""), 0), cplx(0, 1)), InvalidInput);
}

TEST(Lattice, NegativeOrientationIsSwapped) {
    Lattice L(cplx(0, 1), 1.0);
    EXPECT_EQ(L.omega1(), cplx(1.0));
    EXPECT_EQ(L.omega2(), cplx(0, 1));
    EXPECT_GT(L.tau().imag(), 0.0);
}

TEST(Normalize, Examples) {
    Lattice L;
    expect_near_c(normalize(L, {1.3, 0.2}).rep, {0.3, 0.2}, 1e-15);
    EXPECT_EQ(normalize(L, 0.0).rep, cplx(0.0));
    expect_near_c(normalize(L, {-0.1, -0.9}).rep, {0.9, 0.1}, 1e-15);
    EXPECT_THROW(normalize(L, {INFINITY, 0}), InvalidInput);
}

TEST(Normalize, IdempotentAndCongruent) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
        Lattice L(cplx(oracle::uniform(rng, 0.5, 2), oracle::uniform(rng, -1, 1)),
                  cplx(oracle::uniform(rng, -1, 1), oracle::uniform(rng, 0.5, 2)));
        const cplx z(oracle::uniform(rng, -20, 20), oracle::uniform(rng, -20, 20));
        const TorusPoint p = normalize(L, z);
        EXPECT_EQ(normalize(L, p.rep).rep, p.rep);
        EXPECT_TRUE(congruent(L, z, p.rep));
        const auto t = L.barycentric(p.rep);
        EXPECT_GE(t[0], 0.0);
        EXPECT_LT(t[0], 1.0);
        EXPECT_GE(t[1], 0.0);
        EXPECT_LT(t[1], 1.0);
    }
}

TEST(Congruent, Examples) {
    Lattice L;
    EXPECT_TRUE(congruent(L, 0.1, 1.1, 1e-9));
    EXPECT_FALSE(congruent(L, 0.1, 0.4, 1e-9));
    EXPECT_TRUE(congruent(L, 0.9999999999, 0.0, 1e-6));
    EXPECT_THROW(congruent(L, 0.0, 0.0, 0.0), InvalidInput);
}

TEST(ReduceBasis, Examples) {
    {
        auto [R, M] = reduce_basis(Lattice(1.0, cplx(0, 1)));
        EXPECT_EQ(R.tau(), cplx(0, 1));
        EXPECT_EQ(M, UnimodularMap::identity());
    }
    {
        auto [R, M] = reduce_basis(Lattice(1.0, cplx(1, 1)));
        expect_near_c(R.tau(), cplx(0, 1), 1e-15);
        auto b = oracle::brute_reduce(1.0, cplx(1, 1));
        ASSERT_TRUE(b.found);
        expect_near_c(R.tau(), b.w2 / b.w1, 1e-12);
        EXPECT_EQ(M.det(), 1);
    }
    {
        auto [R, M] = reduce_basis(Lattice(2.0, cplx(0, 2)));
        EXPECT_EQ(R.omega1(), cplx(2.0));
        EXPECT_EQ(R.omega2(), cplx(0, 2));
    }
}

TEST(ReduceBasis, MatchesBruteForceOnRandomLattices) {
    std::mt19937_64 rng(2024);
    int compared = 0;
    for (int i = 0; i < 1000; ++i) {
        const cplx w1(oracle::uniform(rng, -2, 2), oracle::uniform(rng, -2, 2));
        const cplx tau(oracle::uniform(rng, -2, 2), oracle::uniform(rng, 0.2, 2.5));
        if (std::abs(w1) < 0.1) continue;
        Lattice L(w1, w1 * tau);
        auto [R, M] = reduce_basis(L);
        EXPECT_TRUE(is_reduced_tau(R.tau())) << R.tau();
        EXPECT_EQ(M.det(), 1);
        // the map carries the old basis to the new one
        auto [a, b] = M.apply(L.omega1(), L.omega2());
        EXPECT_EQ(a, R.omega1());
        EXPECT_EQ(b, R.omega2());
        // idempotent
        auto [R2, M2] = reduce_basis(R);
        EXPECT_EQ(M2, UnimodularMap::identity());
        EXPECT_EQ(R2.omega1(), R.omega1());
        auto brute = oracle::brute_reduce(L.omega1(), L.omega2());
        if (brute.found) {
            ++compared;
            EXPECT_LT(std::abs(brute.w2 / brute.w1 - R.tau()), 1e-9);
            EXPECT_LT(std::abs(std::abs(brute.w1) - std::abs(R.omega1())), 1e-9);
        }
    }
    EXPECT_GT(compared, 500);
}

TEST(ReduceBasis, BoundaryTies) {
    // Re τ = 1/2 is excluded, −1/2 included
    auto [R, M] = reduce_basis(Lattice(1.0, cplx(0.5, 1.5)));
    EXPECT_NEAR(R.tau().real(), -0.5, 1e-15);
    // |τ| = 1 forces Re τ ≤ 0
    const cplx rho = std::polar(1.0, kPi / 3);
    auto [R2, M2] = reduce_basis(Lattice(1.0, rho));
    EXPECT_LE(R2.tau().real(), 1e-12);
    EXPECT_NEAR(std::abs(R2.tau()), 1.0, 1e-12);
    EXPECT_TRUE(is_reduced_tau(R2.tau()));
    const cplx t = std::polar(1.0, 1.3);
    auto [R3, M3] = reduce_basis(Lattice(1.0, t));
    EXPECT_LE(R3.tau().real(), 1e-12);
}

TEST(Scale, Examples) {
    Lattice L;
    Lattice S = scale(L, 2.0);
    EXPECT_EQ(S.omega1(), cplx(2.0));
    EXPECT_EQ(S.omega2(), cplx(0, 2));
    Lattice R = scale(L, cplx(0, 1));
    EXPECT_GT(R.tau().imag(), 0.0);
    EXPECT_TRUE(congruent(R, R.omega1(), 0.0));
    EXPECT_TRUE(congruent(R, cplx(-1, 0), 0.0));
    EXPECT_TRUE(congruent(R, cplx(0, 1), 0.0));
    EXPECT_EQ(scale(L, 1.0), L);
    EXPECT_THROW(scale(L, 0.0), InvalidInput);
}

TEST(Scale, NormalizeCommutes) {
    std::mt19937_64 rng(5);
    Lattice L(1.0, cplx(0.3, 1.2));
    for (int i = 0; i < 200; ++i) {
        const cplx alpha = std::polar(oracle::uniform(rng, 0.2, 3), oracle::uniform(rng, -3, 3));
        const cplx z(oracle::uniform(rng, -5, 5), oracle::uniform(rng, -5, 5));
        Lattice A = scale(L, alpha);
        EXPECT_TRUE(congruent(A, alpha * normalize(L, z).rep, normalize(A, alpha * z).rep));
    }
}

TEST(CanonicalMap, Examples) {
    const LinearMap2 id = canonical_map(Lattice());
    EXPECT_EQ(id.a, (std::array<double, 4>{1, 0, 0, 1}));
    const LinearMap2 h = canonical_map(Lattice(1.0, cplx(0, 2)));
    EXPECT_NEAR(h.a[0], 1.0, 1e-15);
    EXPECT_NEAR(h.a[3], 0.5, 1e-15);
    EXPECT_NEAR(h.a[1], 0.0, 1e-15);
    EXPECT_NEAR(h.a[2], 0.0, 1e-15);
    const cplx tau = std::polar(1.0 / std::sqrt(3.0), kPi / 3);
    const Lattice E(1.0, tau);
    const LinearMap2 he = canonical_map(E);
    EXPECT_GT(he.det(), 0.0);
    // oracle: solve H·[ω1 ω2] = [1 i] directly with the reduced basis
    auto [R, M] = reduce_basis(E);
    const double a = R.omega1().real(), b = R.omega2().real(), c = R.omega1().imag(), d = R.omega2().imag();
    const double det = a * d - b * c;
    // H = [[1,0],[0,1]] · inverse([[a,b],[c,d]])
    EXPECT_NEAR(he.a[0], d / det, 1e-12);
    EXPECT_NEAR(he.a[1], -b / det, 1e-12);
    EXPECT_NEAR(he.a[2], -c / det, 1e-12);
    EXPECT_NEAR(he.a[3], a / det, 1e-12);
    expect_near_c(he.apply(R.omega1()), 1.0, 1e-12);
    expect_near_c(he.apply(R.omega2()), cplx(0, 1), 1e-12);
}

TEST(UnimodularMap, CompositionAndApply) {
    UnimodularMap T{{{{1, 1}, {0, 1}}}};
    UnimodularMap S{{{{0, 1}, {-1, 0}}}};
    EXPECT_EQ((S * T).det(), 1);
    Lattice L(1.0, cplx(0.2, 1.1));
    Lattice A = apply(S * T, L);
    Lattice B = apply(S, apply(T, L));
    EXPECT_LT(std::abs(A.omega1() - B.omega1()), 1e-15);
    EXPECT_LT(std::abs(A.omega2() - B.omega2()), 1e-15);
    UnimodularMap bad{{{{2, 0}, {0, 1}}}};
    EXPECT_THROW(apply(bad, L), InvalidInput);
}
