#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "cdw/lattice.hpp"
#include "support.hpp"

using namespace cdw;

TEST(Laplacian, HandStencils) {
  EXPECT_EQ(periodic_laplacian(IntField{0, 1, 2}), (IntField{3, 0, -3}));
  EXPECT_EQ(periodic_laplacian(IntField{1, 0, 0, 0}), (IntField{-2, 1, 0, 1}));
}

TEST(Laplacian, RejectsShortLattices) {
  EXPECT_THROW(periodic_laplacian(IntField{1, 2}), InvalidLattice);
  EXPECT_THROW(invert_laplacian(IntField{0, 0}), InvalidLattice);
  EXPECT_THROW(ModelParams::make(2, 1.0), InvalidLattice);
}

TEST(Laplacian, ConstantsAreInTheKernel) {
  EXPECT_EQ(periodic_laplacian(IntField(7, 5)), IntField(7, 0));
}

TEST(InvertLaplacian, HandCases) {
  EXPECT_EQ(invert_laplacian(IntField{-2, 1, 0, 1}), (IntField{1, 0, 0, 0}));
  EXPECT_THROW(invert_laplacian(IntField{1, -1, 0, 0}), DivisibilityError);
  EXPECT_THROW(invert_laplacian(IntField{1, 0, 0, 0}), SumNonzeroError);
}

TEST(InvertLaplacian, RoundTripOnRandomFields) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t n = 3 + rng() % 60;
    auto m = support::random_field(rng, n, -20, 20);
    const auto back = invert_laplacian(periodic_laplacian(m));
    EXPECT_EQ(back, min_normalized(m));
  }
}

TEST(NearestInteger, TieConvention) {
  EXPECT_EQ(nearest_integer(0.5), 0);
  EXPECT_EQ(nearest_integer(-0.5), -1);
  EXPECT_EQ(nearest_integer(0.75), 1);
  EXPECT_EQ(nearest_integer(-1.25), -1);
  EXPECT_EQ(nearest_integer(1.5), 1);
}

TEST(NearestInteger, RemainderInHalfOpenInterval) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng);
    const double r = x - static_cast<double>(nearest_integer(x));
    EXPECT_GT(r, -0.5);
    EXPECT_LE(r, 0.5);
  }
}

TEST(Periodic, WrapsNegativeAndLargeIndices) {
  IntField v{10, 20, 30};
  EXPECT_EQ(v[-1], 30);
  EXPECT_EQ(v[3], 10);
  EXPECT_EQ(v[-7], 30);
  EXPECT_EQ(v[8], 30);
}

TEST(ModelParams, EtaMatchesLambda) {
  for (double lambda : {0.01, 1.0, 4.0, 10.0, 100.0}) {
    const auto p = ModelParams::make(8, lambda);
    EXPECT_NEAR((1.0 - p.eta) * (1.0 - p.eta) / p.eta, lambda, 1e-9 * lambda);
    EXPECT_GT(p.eta, 0.0);
    EXPECT_LT(p.eta, 1.0);
  }
  EXPECT_THROW(ModelParams::make(8, 0.0), DomainError);
  EXPECT_THROW(ModelParams::make(8, 1.0, -1.0), DomainError);
}

TEST(Disorder, DerivedQuantitiesAreConsistent) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto d = gen_disorder(seed, 33);
    std::int64_t S = 0;
    double sum_omega = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto s = static_cast<Site>(i);
      EXPECT_GT(d.alpha[s], -0.5);
      EXPECT_LT(d.alpha[s], 0.5);
      EXPECT_DOUBLE_EQ(d.omega[s] + static_cast<double>(d.rounded[s]), d.delta_alpha[s]);
      EXPECT_GT(d.omega[s], -0.5);
      EXPECT_LE(d.omega[s], 0.5);
      S += d.rounded[s];
      sum_omega += d.omega[s];
    }
    EXPECT_EQ(S, d.S);
    EXPECT_NEAR(sum_omega, -static_cast<double>(S), 1e-9);
    for (std::size_t r = 1; r < d.size(); ++r) {
      EXPECT_LE(d.omega.values()[d.sigma[r - 1]], d.omega.values()[d.sigma[r]]);
    }
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d.sigma[d.rank[i]], i);
  }
}

TEST(Seeds, StreamsAreDistinctAndReproducible) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(stream_seed(42, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(gen_disorder(stream_seed(7, 3), 16).alpha, gen_disorder(stream_seed(7, 3), 16).alpha);
  EXPECT_NE(gen_disorder(stream_seed(7, 3), 16).alpha, gen_disorder(stream_seed(7, 4), 16).alpha);
}

TEST(Support, DisorderWithPrescribedLaplacian) {
  const std::vector<double> target{0.3, -0.2, 0.1, -0.45, 0.25};
  const auto d = support::disorder_with_laplacian(target);
  for (std::size_t i = 0; i < target.size(); ++i) EXPECT_NEAR(d.delta_alpha.values()[i], target[i], 1e-12);
}
