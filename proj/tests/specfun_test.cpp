#include "sdnbs/specfun.hpp"

#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <thread>
#include <vector>

namespace {

using sdnbs::Accuracy;
using sdnbs::exp_integral_ei;
using sdnbs::kEulerGamma;
using sdnbs::log_factorial;
using sdnbs::poisson_cdf;
using sdnbs::poisson_pmf;
using sdnbs::poisson_sf;
using Big = boost::multiprecision::cpp_bin_float_50;

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

// Poisson pmf from its definition in 50-digit arithmetic.
double pmf_oracle(std::uint64_t n, double b) {
  Big lb = b;
  Big v = exp(Big(n) * log(lb) - lb - boost::multiprecision::lgamma(Big(n + 1)));
  return static_cast<double>(v);
}

double ei_oracle(double x) { return static_cast<double>(boost::math::expint(Big(x))); }

TEST(LogFactorial, SmallExactCases) {
  EXPECT_EQ(log_factorial(0), 0.0);
  EXPECT_EQ(log_factorial(1), 0.0);
  // ln(10!) = ln(3628800), exact integer then log.
  EXPECT_NEAR(log_factorial(10), 15.104412573075515295, 1e-14 * 15.1);
}

TEST(LogFactorial, MatchesCumulativeLogSum) {
  long double cumulative = 0.0L;
  for (std::uint64_t n = 2; n <= 2000; ++n) {
    cumulative += std::log(static_cast<long double>(n));
    ASSERT_LE(rel_err(log_factorial(n), static_cast<double>(cumulative)), 1e-14) << "n = " << n;
  }
}

TEST(LogFactorial, LargeArgumentsAgainstMultiprecision) {
  for (std::uint64_t n : {21ULL, 35ULL, 36ULL, 80ULL, 81ULL, 500ULL, 501ULL, 100000ULL, 1000000ULL}) {
    const double want = static_cast<double>(boost::multiprecision::lgamma(Big(n + 1)));
    EXPECT_LE(rel_err(log_factorial(n), want), 1e-14) << "n = " << n;
  }
}

TEST(PoissonPmf, TrivialValues) {
  for (double b : {0.1, 1.0, 7.5, 300.0}) EXPECT_DOUBLE_EQ(poisson_pmf(0, b), std::exp(-b));
  EXPECT_NEAR(poisson_pmf(1, 1.0), std::exp(-1.0), 1e-16);
}

TEST(PoissonPmf, FiftyFiftyAgainstExactRational) {
  // 50^50 / 50! e^{-50}, evaluated with exact integers and a 50-digit exponential.
  boost::multiprecision::cpp_int num = boost::multiprecision::pow(boost::multiprecision::cpp_int(50), 50);
  boost::multiprecision::cpp_int den = 1;
  for (int k = 2; k <= 50; ++k) den *= k;
  const Big exact = Big(num) / Big(den) * exp(Big(-50));
  EXPECT_LE(rel_err(poisson_pmf(50, 50.0), static_cast<double>(exact)), 1e-12);
  EXPECT_NEAR(static_cast<double>(exact), 0.056325006325190825, 1e-17);
}

TEST(PoissonPmf, NoOverflowAtExtremeArguments) {
  for (auto [n, b] : std::vector<std::pair<std::uint64_t, double>>{
           {1000000, 1e5}, {100000, 1e5}, {99500, 1e5}, {1000000, 1e6}, {3, 1e5}, {1000000, 0.5}}) {
    const double p = poisson_pmf(n, b);
    ASSERT_TRUE(std::isfinite(p));
    ASSERT_GE(p, 0.0);
    ASSERT_LE(p, 1.0);
    const double want = pmf_oracle(n, b);
    if (want > 1e-300) {
      EXPECT_LE(rel_err(p, want), 1e-12) << n << " " << b;
    }
  }
}

TEST(PoissonPmf, RejectsNonPositiveLoad) {
  EXPECT_THROW(poisson_pmf(1, 0.0), std::invalid_argument);
  EXPECT_THROW(poisson_pmf(1, -1.0), std::invalid_argument);
  EXPECT_THROW(poisson_pmf(1, NAN), std::invalid_argument);
}

TEST(PoissonPmf, SumsToOne) {
  for (double b : {0.5, 1.0, 10.0, 100.0}) {
    const auto n_max = static_cast<std::uint64_t>(std::ceil(b + 20 * std::sqrt(b) + 20));
    double total = 0.0;
    for (std::uint64_t n = 0; n <= n_max; ++n) total += poisson_pmf(n, b);
    EXPECT_GE(total, 1.0 - 1e-10) << "b = " << b;
    EXPECT_LE(total, 1.0 + 1e-12) << "b = " << b;
  }
}

TEST(PoissonCdf, TrivialValues) {
  for (double b : {0.2, 1.0, 40.0}) EXPECT_NEAR(poisson_cdf(0, b), std::exp(-b), 1e-16);
  for (double b : {0.5, 1.0, 10.0, 100.0}) {
    EXPECT_NEAR(poisson_cdf(static_cast<std::uint64_t>(20 * b) + 1, b), 1.0, 1e-12);
  }
}

TEST(PoissonCdf, MatchesQuadratureOfIncompleteGamma) {
  // Gamma(11, 10) / 10! = int_10^inf t^10 e^{-t} dt / 10!
  boost::math::quadrature::exp_sinh<double> integrator;
  const double integral = integrator.integrate([](double u) {
    const double t = 10.0 + u;
    return std::exp(10.0 * std::log(t) - t);
  });
  const double want = integral / 3628800.0;
  EXPECT_LE(rel_err(poisson_cdf(10, 10.0), want), 1e-10);
}

TEST(PoissonCdf, PlusUpperTailIsOne) {
  for (double b : {0.5, 1.0, 10.0, 100.0}) {
    const auto n_max = static_cast<std::uint64_t>(std::ceil(b + 20 * std::sqrt(b) + 20));
    for (std::uint64_t c : {0ULL, 1ULL, 3ULL, 10ULL, 50ULL, 120ULL}) {
      double tail = 0.0;
      for (std::uint64_t k = c + 1; k <= n_max; ++k) tail += poisson_pmf(k, b);
      EXPECT_NEAR(poisson_cdf(c, b) + tail, 1.0, 1e-10) << b << " " << c;
    }
  }
}

TEST(PoissonCdf, AgreesWithRegularizedGammaFromBoost) {
  for (double b : {0.01, 0.3, 1.0, 4.5, 10.0, 37.0, 100.0, 500.0, 5000.0}) {
    for (std::uint64_t c : {0ULL, 1ULL, 2ULL, 5ULL, 10ULL, 36ULL, 99ULL, 100ULL, 480ULL, 5100ULL}) {
      const double q = boost::math::gamma_q(static_cast<double>(c + 1), b);
      const double p = boost::math::gamma_p(static_cast<double>(c + 1), b);
      if (q > 1e-300) {
        EXPECT_LE(rel_err(poisson_cdf(c, b), q), 1e-12) << b << " " << c;
      }
      if (p > 1e-300) {
        EXPECT_LE(rel_err(poisson_sf(c, b), p), 1e-12) << b << " " << c;
      }
    }
  }
}

TEST(PoissonCdf, Monotone) {
  for (double b : {0.5, 5.0, 50.0}) {
    double prev = 0.0;
    for (std::uint64_t c = 0; c < 200; ++c) {
      const double v = poisson_cdf(c, b);
      ASSERT_GE(v, prev);
      ASSERT_LE(v, 1.0);
      prev = v;
    }
  }
  for (std::uint64_t c : {0ULL, 5ULL, 40ULL}) {
    double prev = 1.0;
    for (double b = 0.05; b < 200.0; b *= 1.1) {
      const double v = poisson_cdf(c, b);
      ASSERT_LE(v, prev + 1e-15);
      ASSERT_GE(v, 0.0);
      prev = v;
    }
  }
}

TEST(ExpIntegralEi, ValueAtOne) {
  // gamma + sum 1/(k k!) in 50 digits.
  Big s = boost::math::constants::euler<Big>();
  Big fact = 1;
  for (int k = 1; k < 60; ++k) {
    fact *= k;
    s += 1 / (Big(k) * fact);
  }
  EXPECT_NEAR(static_cast<double>(s), 1.8951178163559368, 1e-16);
  EXPECT_LE(rel_err(exp_integral_ei(1.0), static_cast<double>(s)), 1e-13);
  EXPECT_LE(rel_err(exp_integral_ei(1.0, sdnbs::kFullPrecision), static_cast<double>(s)), 1e-15);
  EXPECT_LE(rel_err(sdnbs::kEi1, static_cast<double>(s)), 1e-16);
}

TEST(ExpIntegralEi, ExceedsLogPlusGamma) {
  for (double x = 1e-6; x < 700.0; x *= 1.3) {
    ASSERT_GT(exp_integral_ei(x), std::log(x) + kEulerGamma) << x;
  }
}

TEST(ExpIntegralEi, LeadingAsymptoticTermAtHundred) {
  EXPECT_LE(std::abs(exp_integral_ei(100.0) * 100.0 * std::exp(-100.0) - 1.0), 0.02);
}

TEST(ExpIntegralEi, AccuracyAgainstMultiprecision) {
  // Ei has a simple zero near x = 0.3725; relative error is measured against
  // the magnitude of the terms being combined there.
  const Accuracy acc{};
  for (double x = 1e-6; x <= 700.0; x *= 1.17) {
    const double want = ei_oracle(x);
    const double scale = std::max(std::abs(want), x < 1.0 ? std::abs(std::log(x)) + kEulerGamma : 0.0);
    ASSERT_LE(std::abs(exp_integral_ei(x, acc) - want) / scale, acc.rel_tol) << "x = " << x;
  }
  for (double x : {39.999, 40.0, 40.001, 500.0, 700.0}) {
    EXPECT_LE(rel_err(exp_integral_ei(x, acc), ei_oracle(x)), acc.rel_tol) << "x = " << x;
  }
}

TEST(ExpIntegralEi, ScaledFormStaysFinite) {
  for (double x : {1.0, 39.0, 41.0, 700.0, 1e4, 1e6}) {
    const double s = sdnbs::exp_integral_ei_scaled(x);
    ASSERT_TRUE(std::isfinite(s));
    if (x <= 700.0) {
      EXPECT_LE(rel_err(s, ei_oracle(x) * std::exp(-x)), 1e-13);
    }
  }
  // e^{-x} Ei(x) -> 1/x (1 + 1/x + 2/x^2 + ...)
  EXPECT_LE(rel_err(sdnbs::exp_integral_ei_scaled(1e6), 1e-6 * (1 + 1e-6 + 2e-12)), 1e-15);
}

TEST(ExpIntegralEi, SeriesIdentity) {
  for (double x = 0.01; x <= 30.0; x *= 1.21) {
    long double power = 1.0L;
    long double sum = 0.0L;
    for (int k = 1; k < 400; ++k) {
      power *= static_cast<long double>(x) / k;
      sum += power / k;
    }
    const double tail = exp_integral_ei(x) - kEulerGamma - std::log(x);
    EXPECT_LE(rel_err(tail, static_cast<double>(sum)), 1e-12) << "x = " << x;
  }
}

TEST(ExpIntegralEi, RegimesAgreeInOverlapBand) {
  const Accuracy acc{};
  for (double x = 35.0; x <= 45.0; x += 0.5) {
    const double series = kEulerGamma + std::log(x) + sdnbs::detail::ei_series_tail(x, acc);
    const double asymptotic = std::exp(x) * sdnbs::detail::ei_asymptotic_scaled(x, acc);
    EXPECT_LE(rel_err(series, asymptotic), 10 * acc.rel_tol) << "x = " << x;
  }
}

TEST(ExpIntegralEi, StrictlyIncreasing) {
  double prev = exp_integral_ei(1e-6);
  for (double x = 2e-6; x < 700.0; x *= 1.05) {
    const double v = exp_integral_ei(x);
    ASSERT_GT(v, prev) << x;
    prev = v;
  }
}

TEST(ExpIntegralEi, SignalsNonConvergence) {
  EXPECT_THROW(exp_integral_ei(30.0, Accuracy{1e-13, 10}), sdnbs::NonConvergenceError);
  EXPECT_THROW(exp_integral_ei(45.0, Accuracy{1e-13, 10}), sdnbs::NonConvergenceError);
  // The asymptotic expansion alone cannot reach 1e-13 at small x.
  EXPECT_THROW(sdnbs::detail::ei_asymptotic_scaled(10.0, Accuracy{}), sdnbs::NonConvergenceError);
}

TEST(ExpIntegralEi, RejectsBadInput) {
  EXPECT_THROW(exp_integral_ei(0.0), std::invalid_argument);
  EXPECT_THROW(exp_integral_ei(-1.0), std::invalid_argument);
  EXPECT_THROW(exp_integral_ei(1.0, Accuracy{0.0, 100}), std::invalid_argument);
  EXPECT_THROW(exp_integral_ei(1.0, Accuracy{1e-2, 100}), std::invalid_argument);
  EXPECT_THROW(exp_integral_ei(1.0, Accuracy{1e-13, 5}), std::invalid_argument);
}

TEST(Specfun, ConcurrentCallsMatchSerial) {
  std::vector<double> xs;
  for (double x = 0.01; x < 600.0; x *= 1.4) xs.push_back(x);
  std::vector<double> serial;
  for (double x : xs) serial.push_back(exp_integral_ei(x) + poisson_cdf(7, x));
  std::vector<std::vector<double>> results(4);
  {
    std::vector<std::jthread> pool;
    for (auto& out : results) {
      pool.emplace_back([&xs, &out] {
        for (double x : xs) out.push_back(exp_integral_ei(x) + poisson_cdf(7, x));
      });
    }
  }
  for (const auto& r : results) EXPECT_EQ(r, serial);
}

}  // namespace
