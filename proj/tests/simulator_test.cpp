#include "sdnbs/simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace {

using namespace sdnbs;

TEST(Random, StreamsAreDeterministicAndDistinct) {
  auto a = Xoshiro256StarStar::stream(42, 7);
  auto b = Xoshiro256StarStar::stream(42, 7);
  auto c = Xoshiro256StarStar::stream(42, 8);
  auto d = Xoshiro256StarStar::stream(43, 7);
  bool differs_c = false;
  bool differs_d = false;
  for (int i = 0; i < 16; ++i) {
    const auto va = a();
    EXPECT_EQ(va, b());
    differs_c |= va != c();
    differs_d |= va != d();
  }
  EXPECT_TRUE(differs_c);
  EXPECT_TRUE(differs_d);
}

TEST(Random, BoundedIsUniformEnough) {
  Xoshiro256StarStar rng(5);
  std::vector<int> counts(7, 0);
  constexpr int kDraws = 700'000;
  for (int i = 0; i < kDraws; ++i) ++counts[rng.bounded(7)];
  for (int c : counts) EXPECT_NEAR(c, kDraws / 7, 5 * std::sqrt(kDraws / 7.0));
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform_open();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

struct SampleMoments {
  double mean;
  double variance;
};

SampleMoments poisson_moments(double b, int draws, std::uint64_t seed) {
  Xoshiro256StarStar rng(seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto k = static_cast<double>(sample_poisson(rng, b));
    sum += k;
    sum_sq += k * k;
  }
  const double mean = sum / draws;
  return {mean, (sum_sq - draws * mean * mean) / (draws - 1)};
}

TEST(SamplePoisson, MeanAndVarianceAtTen) {
  const auto m = poisson_moments(10.0, 1'000'000, 11);
  EXPECT_NEAR(m.mean, 10.0, 4 * std::sqrt(10.0 / 1e6));
  EXPECT_NEAR(m.variance, 10.0, 0.05 * 10.0);
}

TEST(SamplePoisson, RejectionRegimeMoments) {
  for (double b : {30.0, 75.5, 1000.0, 1e5}) {
    const auto m = poisson_moments(b, 400'000, 99);
    EXPECT_NEAR(m.mean, b, 4 * std::sqrt(b / 4e5)) << b;
    EXPECT_NEAR(m.variance, b, 0.05 * b) << b;
  }
}

TEST(SamplePoisson, RejectionRegimeMatchesPmf) {
  // Chi-square-style check of the PTRS histogram against the pmf at b = 40.
  constexpr double b = 40.0;
  constexpr int kDraws = 500'000;
  Xoshiro256StarStar rng(3);
  std::vector<int> hist(200, 0);
  for (int i = 0; i < kDraws; ++i) {
    const auto k = sample_poisson(rng, b);
    if (k < hist.size()) ++hist[k];
  }
  double chi2 = 0.0;
  int cells = 0;
  for (std::uint64_t k = 0; k < hist.size(); ++k) {
    const double expected = kDraws * poisson_pmf(k, b);
    if (expected < 20.0) continue;
    chi2 += (hist[k] - expected) * (hist[k] - expected) / expected;
    ++cells;
  }
  // ~45 cells; the 99.99% quantile of chi2(45) is about 90.
  EXPECT_LT(chi2, 90.0) << cells << " cells";
}

TEST(SamplePoisson, FixedSeedReproduces) {
  Xoshiro256StarStar a(2024);
  Xoshiro256StarStar b(2024);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(sample_poisson(a, 3.5), sample_poisson(b, 3.5));
    ASSERT_EQ(sample_poisson(a, 300.0), sample_poisson(b, 300.0));
  }
}

TEST(SimulateSlot, Examples) {
  Xoshiro256StarStar rng(1);
  EXPECT_EQ(simulate_slot(rng, 5, 10), 0.0);
  EXPECT_EQ(simulate_slot(rng, 10, 10), 0.0);
  for (std::uint64_t n : {1ULL, 2ULL, 57ULL}) EXPECT_EQ(simulate_slot(rng, n, 0), 1.0);
  double total = 0.0;
  constexpr int kSlots = 20'000;
  SlotScratch scratch;
  for (int i = 0; i < kSlots; ++i) total += simulate_slot(rng, 20, 10, scratch);
  EXPECT_NEAR(total / kSlots, 0.5, 1e-12);
}

TEST(SimulateSlot, SubsetIsUniform) {
  // Each of n users should be cached with probability C/n.
  constexpr std::uint64_t n = 12;
  constexpr std::uint64_t c = 4;
  constexpr int kTrials = 120'000;
  Xoshiro256StarStar rng(77);
  SlotScratch scratch;
  std::vector<int> hits(n, 0);
  for (int t = 0; t < kTrials; ++t) {
    simulate_slot(rng, n, c, scratch);
    for (std::uint64_t u = 0; u < n; ++u) hits[u] += scratch.cached[u];
  }
  const double p = static_cast<double>(c) / n;
  for (int h : hits) EXPECT_NEAR(h, kTrials * p, 5 * std::sqrt(kTrials * p * (1 - p)));
}

TEST(EstimateExpectedDelay, AgreesWithAnalyticValue) {
  const ModelParams p{1.0, 5.0, 2, 1.0};
  const auto est = estimate_expected_delay(p, {1'000'000, 17, Estimator::packet_level});
  const double analytic = expected_delay(p).normalized;
  EXPECT_LE(std::abs(est.mean - analytic), 4 * est.std_error);
  EXPECT_EQ(est.samples, 1'000'000u);
  EXPECT_EQ(est.seed, 17u);
  EXPECT_NEAR(est.ci95_high - est.mean, 1.96 * est.std_error, 1e-15);
  EXPECT_NEAR(est.mean - est.ci95_low, 1.96 * est.std_error, 1e-15);
  EXPECT_LE(est.ci95_low, est.mean);
  EXPECT_GE(est.ci95_high, est.mean);
}

TEST(EstimateExpectedDelay, OversizedTableNeverMisses) {
  for (double b : {0.5, 5.0}) {
    const ModelParams p{1.0, b, static_cast<std::uint64_t>(20 * b + 20), 1.0};
    for (auto e : {Estimator::packet_level, Estimator::conditional}) {
      EXPECT_LE(estimate_expected_delay(p, {100'000, 3, e}).mean, 1e-6);
    }
  }
}

TEST(EstimateExpectedDelay, DeterministicAcrossRunsAndThreadCounts) {
  const ModelParams p{1e-3, 20'000.0, 15, 1.0};
  const SimConfig cfg{50'000, 1234, Estimator::packet_level};
  const auto one = estimate_expected_delay(p, cfg, 1);
  for (unsigned threads : {1u, 2u, 3u, 8u}) {
    const auto again = estimate_expected_delay(p, cfg, threads);
    EXPECT_EQ(again.mean, one.mean) << threads;
    EXPECT_EQ(again.std_error, one.std_error) << threads;
    EXPECT_EQ(again.ci95_low, one.ci95_low);
    EXPECT_EQ(again.ci95_high, one.ci95_high);
  }
  const auto other_seed = estimate_expected_delay(p, {50'000, 1235, Estimator::packet_level}, 1);
  EXPECT_NE(other_seed.mean, one.mean);
}

TEST(EstimateExpectedDelay, EstimatorsAgree) {
  for (auto [b, c] : std::vector<std::pair<double, std::uint64_t>>{{5, 2}, {50, 40}, {3, 0}}) {
    const ModelParams p{1.0, b, c, 1.0};
    const auto pl = estimate_expected_delay(p, {200'000, 5, Estimator::packet_level});
    const auto cond = estimate_expected_delay(p, {200'000, 5, Estimator::conditional});
    const double combined = std::sqrt(pl.std_error * pl.std_error + cond.std_error * cond.std_error);
    EXPECT_LE(std::abs(pl.mean - cond.mean), 4 * combined + 1e-15);
  }
}

TEST(EstimateExpectedDelay, ConditionalDoesNotIncreaseVariance) {
  for (double b : {5.0, 50.0}) {
    for (std::uint64_t c : {2ULL, 40ULL}) {
      const ModelParams p{1.0, b, c, 1.0};
      const auto pl = estimate_expected_delay(p, {100'000, 9, Estimator::packet_level});
      const auto cond = estimate_expected_delay(p, {100'000, 9, Estimator::conditional});
      EXPECT_LE(cond.std_error, pl.std_error) << b << " " << c;
    }
  }
}

TEST(EstimateExpectedDelay, SingleSlot) {
  const auto est = estimate_expected_delay({1.0, 3.0, 1, 1.0}, {1, 8, Estimator::conditional});
  EXPECT_EQ(est.samples, 1u);
  EXPECT_EQ(est.std_error, 0.0);
  EXPECT_GE(est.mean, 0.0);
  EXPECT_LE(est.mean, 1.0);
}

TEST(EstimateExpectedDelay, RejectsInvalidConfig) {
  EXPECT_THROW(estimate_expected_delay({1.0, 3.0, 1, 1.0}, {0, 8, Estimator::conditional}),
               std::invalid_argument);
  EXPECT_THROW(estimate_expected_delay({-1.0, 3.0, 1, 1.0}, {10, 8, Estimator::conditional}),
               std::invalid_argument);
}

}  // namespace
