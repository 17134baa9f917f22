#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "cdw/analytic.hpp"
#include "cdw/oracle.hpp"
#include "cdw/statistics.hpp"
#include "cdw/toy_model.hpp"

using namespace cdw;

TEST(DenseSolve, SmallSystem) {
  const auto x = oracle::dense_solve({2.0, 1.0, 1.0, 3.0}, {3.0, 5.0});
  EXPECT_NEAR(x[0], 0.8, 1e-14);
  EXPECT_NEAR(x[1], 1.4, 1e-14);
  EXPECT_THROW(oracle::dense_solve({1.0, 2.0, 2.0, 4.0}, {1.0, 1.0}), InternalError);
}

TEST(BruteThreshold, BoundIsSlack) {
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t L = 4 + trial % 4;
    const auto d = gen_disorder(stream_seed(31, trial), L);
    const auto b3 = oracle::brute_threshold(d, 3);
    const auto b5 = oracle::brute_threshold(d, 5);
    EXPECT_EQ(b3.m_plus, b5.m_plus);
    EXPECT_EQ(b3.m_minus, b5.m_minus);
    EXPECT_DOUBLE_EQ(b3.max_value, b5.max_value);
  }
}

TEST(BruteThreshold, OptimumValuesMatchClosedForm) {
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t L = 4 + trial % 5;
    const auto d = gen_disorder(stream_seed(32, trial), L);
    const auto b = oracle::brute_threshold(d, 3);
    EXPECT_NEAR(b.max_value, toy::z_plus_max(d), 1e-12);
    const auto zm = toy::negative_threshold(d).z;
    EXPECT_NEAR(b.min_value, *std::min_element(zm.begin(), zm.end()), 1e-12);
  }
}

TEST(BruteThreshold, RejectsLargeLattices) {
  const auto d = gen_disorder(33, oracle::kBruteMaxL + 1);
  EXPECT_THROW(oracle::brute_threshold(d), DomainError);
  EXPECT_THROW(oracle::brute_threshold(gen_disorder(33, 5), 0), DomainError);
}

TEST(NaiveZfa, MatchesToyLimitAtHugeLambda) {
  // with eta ~ 1e-6 the full chain orders coordinates like the toy model
  const auto p = ModelParams::make(8, 1e6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = gen_disorder(stream_seed(34, trial), 8);
    const auto m0 = toy::negative_threshold(d).m;
    EXPECT_EQ(oracle::naive_zfa_full(m0, d, p), toy::zfa_toy(toy::make_toy_config(m0, d), d).config.m);
  }
}

TEST(Sandpile, StableStateIsFixed) {
  const oracle::SandpileState s{{1, 0, 1, 1, 0, 1}};
  const auto r = oracle::sandpile_stabilize(s);
  EXPECT_EQ(r.state, s);
  EXPECT_EQ(r.topples, 0);
}

TEST(Sandpile, GrainOnAllOnesEmptiesTheMirrorSite) {
  // N ones plus a grain at position k (1-based): the zero lands at N + 1 - k
  for (std::size_t N = 1; N < 30; ++N) {
    for (std::size_t k = 1; k <= N; ++k) {
      oracle::SandpileState s{std::vector<std::int64_t>(N, 1)};
      s.h[k - 1] += 1;
      const auto r = oracle::sandpile_stabilize(s);
      std::vector<std::int64_t> expect(N, 1);
      expect[N - k] = 0;
      ASSERT_EQ(r.state.h, expect) << "N " << N << " k " << k;
      ASSERT_EQ(r.topples, static_cast<std::int64_t>(k * (N + 1 - k)));
    }
  }
}

TEST(Sandpile, ActiveRegionStopsAtZeros) {
  const oracle::SandpileState s{{1, 1, 0, 1, 2, 1, 1, 0, 1}};
  const auto r = oracle::sandpile_stabilize(s);
  // active region is positions 4..7 between the zeros at 3 and 8
  EXPECT_EQ(r.state.h, (std::vector<std::int64_t>{1, 1, 1, 1, 1, 0, 1, 1, 1}));
  EXPECT_EQ(r.topples, 6);
}

TEST(Sandpile, ToppleOrderDoesNotMatter) {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t N = 1 + trial % 40;
    std::uniform_int_distribution<std::int64_t> h(0, 4);
    oracle::SandpileState s{std::vector<std::int64_t>(N)};
    for (auto& v : s.h) v = h(rng);
    const auto a = oracle::sandpile_stabilize(s, 0);
    const auto b = oracle::sandpile_stabilize(s, 1 + trial);
    ASSERT_TRUE(a.state.stable());
    ASSERT_EQ(a.state, b.state);
    ASSERT_EQ(a.topples, b.topples);
  }
}

TEST(Sandpile, RejectsNegativeHeights) {
  EXPECT_THROW(oracle::sandpile_stabilize(oracle::SandpileState{{1, -1}}), DomainError);
}

TEST(Correspondence, HoldsAtL64) {
  std::size_t degenerate = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = gen_disorder(stream_seed(36, trial), 64);
    const auto rep = oracle::correspondence_check(d);
    ASSERT_TRUE(rep.ok) << "trial " << trial << ": " << rep.message;
    ASSERT_EQ(rep.topples, rep.sigma_total);
    if (rep.active == 0 && rep.sigma_total == 0) ++degenerate;
  }
  EXPECT_GT(degenerate, 0u);
}

TEST(Correspondence, SmallLattices) {
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t L = 3 + trial % 20;
    const auto rep = oracle::correspondence_check(gen_disorder(stream_seed(37, trial), L));
    ASSERT_TRUE(rep.ok) << "L " << L << " trial " << trial << ": " << rep.message;
  }
}

// Rescaled total topple counts follow the u = 0 limit density.
TEST(Correspondence, SizesFollowTheLimitDensity) {
  const std::size_t L = 256;
  const std::size_t n = 10000;
  std::vector<double> s(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto rep = oracle::correspondence_check(stats::realization(38, r, L));
    ASSERT_TRUE(rep.ok);
    s[r] = static_cast<double>(rep.topples) / static_cast<double>(L * L);
  }
  const analytic::SigmaLimitCdf cdf(0.0);
  EXPECT_LT(stats::ks_statistic(stats::Ecdf(s), [&](double x) { return cdf(x); }), 0.02);
}
