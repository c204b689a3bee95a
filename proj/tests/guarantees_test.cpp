#include "histcal/guarantees.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"

namespace histcal {
namespace {

constexpr GuaranteeVariant kVariants[] = {
    GuaranteeVariant::umd_conditional, GuaranteeVariant::umd_original_conditional,
    GuaranteeVariant::randomized_marginal, GuaranteeVariant::randomized_conditional,
    GuaranteeVariant::ece_expectation};

TEST(EpsUmd, ReferencePoints) {
  EXPECT_LE(eps_umd(1000, 5, 0.1), 0.12);
  EXPECT_LE(eps_umd(5000, 10, 0.1), 0.08);
  EXPECT_LE(eps_umd(20000, 22, 0.1), 0.06);
}

TEST(EpsUmd, DirectFormula) {
  EXPECT_NEAR(eps_umd(1000, 5, 0.1), std::sqrt(std::log(100.0) / 398.0), 1e-15);
  EXPECT_NEAR(eps_umd(5000, 10, 0.1), std::sqrt(std::log(200.0) / 998.0), 1e-15);
}

TEST(EpsUmd, RejectsTooFewPoints) {
  try {
    eps_umd(19, 10, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_configuration);
  }
  EXPECT_THROW(eps_umd(100, 10, 0.0), Error);
  EXPECT_THROW(eps_umd(100, 10, 1.0), Error);
}

TEST(EpsUmdOriginal, BelowTenthAt2900) { EXPECT_LT(eps_umd_original(2900, 10, 0.1), 0.1); }

TEST(EpsUmdOriginal, AdditiveTermIsExactlyOneOverFloor) {
  for (std::size_t n : {20u, 99u, 1000u, 2900u}) {
    for (std::size_t b : {1u, 3u, 10u}) {
      EXPECT_NEAR(eps_umd_original(n, b, 0.1) - eps_umd(n, b, 0.1),
                  1.0 / static_cast<double>(n / b), 1e-15);
    }
  }
}

TEST(EpsUmdOriginal, AdditiveTermSmallWhenWidthSmall) {
  for (std::size_t b = 5; b <= 60; ++b) {
    for (double alpha : {0.01, 0.05, 0.1, 0.2, 0.5}) {
      for (std::size_t n = 2 * b; n <= 400 * b; n += b / 2 + 1) {
        if (eps_umd(n, b, alpha) > 0.1) continue;
        ASSERT_LE(1.0 / static_cast<double>(n / b), 0.007) << n << " " << b << " " << alpha;
      }
    }
  }
}

TEST(EpsRandomized, ConditionalWithoutDeltaIsUmd) {
  for (std::size_t n : {40u, 1500u, 9999u}) {
    EXPECT_EQ(eps_randomized(n, 10, 0.1, 0.0, CalibrationMode::conditional), eps_umd(n, 10, 0.1));
  }
}

TEST(EpsRandomized, MarginalNearTenthAt1500) {
  EXPECT_NEAR(eps_randomized(1500, 10, 0.1, 1e-10, CalibrationMode::marginal), 0.1, 0.005);
  EXPECT_NEAR(eps_randomized(1500, 10, 0.1, 0.0, CalibrationMode::marginal),
              std::sqrt(std::log(20.0) / 298.0), 1e-15);
}

TEST(EpsRandomized, OrderingAcrossVariants) {
  for (std::size_t b = 1; b <= 30; b += 3) {
    for (std::size_t n = 2 * b; n < 5000; n += 37) {
      for (double delta : {0.0, 1e-3}) {
        const double m = eps_randomized(n, b, 0.1, delta, CalibrationMode::marginal);
        const double c = eps_randomized(n, b, 0.1, delta, CalibrationMode::conditional);
        ASSERT_LE(m, c);
        ASSERT_LE(c, eps_umd_original(n, b, 0.1) + delta);
      }
    }
  }
}

TEST(EceExpectationBound, Examples) {
  EXPECT_NEAR(ece_expectation_bound(2000, 10, 0.0), 0.05, 1e-15);
  EXPECT_NEAR(ece_expectation_bound(2, 1, 0.0), 0.5, 1e-15);
  EXPECT_NEAR(ece_expectation_bound(2000, 10, 0.01) - ece_expectation_bound(2000, 10, 0.0), 0.01,
              1e-15);
  EXPECT_THROW(ece_expectation_bound(19, 10, 0.0), Error);
}

TEST(HoeffdingHalfwidth, Examples) {
  EXPECT_NEAR(hoeffding_halfwidth(150, 0.1), 0.0999, 5e-5);
  // Budget 0.05 spread over B = 10 bins: t = 0.005, log(2/t) = log 400.
  EXPECT_NEAR(hoeffding_halfwidth(300, 0.005), std::sqrt(std::log(400.0) / 600.0), 1e-15);
  EXPECT_LE(hoeffding_halfwidth(300, 0.005), 0.1);
  EXPECT_NEAR(hoeffding_halfwidth(400, 0.1), hoeffding_halfwidth(100, 0.1) / 2, 1e-15);
  EXPECT_THROW(hoeffding_halfwidth(10, 2.0), Error);
  EXPECT_THROW(hoeffding_halfwidth(10, 1.0), Error);
  EXPECT_THROW(hoeffding_halfwidth(0, 0.1), Error);
}

TEST(Bounds, MonotoneOverGrids) {
  for (auto v : kVariants) {
    for (std::size_t b : {1u, 2u, 7u, 15u}) {
      // Strictly decreasing when floor(n/B) steps; never increasing.
      double prev = guarantee_epsilon(v, 2 * b, b, 0.1, 0.0);
      for (std::size_t n = 3 * b; n < 200 * b; n += b) {
        const double e = guarantee_epsilon(v, n, b, 0.1, 0.0);
        ASSERT_LT(e, prev) << to_string(v);
        prev = e;
      }
      double prev_a = guarantee_epsilon(v, 100 * b, b, 0.01, 0.0);
      for (double a = 0.02; a < 0.99; a += 0.01) {
        const double e = guarantee_epsilon(v, 100 * b, b, a, 0.0);
        if (v == GuaranteeVariant::ece_expectation) {
          ASSERT_EQ(e, prev_a);
        } else {
          ASSERT_LT(e, prev_a) << to_string(v);
        }
        prev_a = e;
      }
    }
  }
}

TEST(Bounds, LogTermIncreasesWithB) {
  // Hold floor(n/B) fixed so only the log(2B/alpha) term moves.
  for (std::size_t b = 1; b < 40; ++b) {
    ASSERT_LT(eps_umd(100 * b, b, 0.1), eps_umd(100 * (b + 1), b + 1, 0.1));
  }
}

TEST(RequiredN, MatchesLinearScan) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> eps_dist(0.04, 0.5);
  std::uniform_real_distribution<double> alpha_dist(0.01, 0.5);
  std::uniform_int_distribution<std::size_t> b_dist(1, 25);
  std::uniform_int_distribution<int> v_dist(0, 4);
  for (int t = 0; t < 1000; ++t) {
    const double eps = eps_dist(rng);
    const double alpha = alpha_dist(rng);
    const std::size_t b = b_dist(rng);
    const auto v = kVariants[v_dist(rng)];
    const double delta = (v == GuaranteeVariant::umd_conditional ||
                          v == GuaranteeVariant::umd_original_conditional)
                             ? 0.0
                             : 0.01;
    const auto got = required_n(eps, alpha, b, v, delta);
    const auto want = oracle::linear_scan(2 * b, [&](std::size_t n) {
      return guarantee_epsilon(v, n, b, alpha, delta) <= eps;
    });
    ASSERT_EQ(got, want) << to_string(v) << " eps=" << eps << " alpha=" << alpha << " B=" << b;
    ASSERT_LE(guarantee_epsilon(v, got, b, alpha, delta), eps);
    if (got > 2 * b) {
      ASSERT_GT(guarantee_epsilon(v, got - 1, b, alpha, delta), eps);
    }
  }
}

TEST(RequiredN, OriginalVariantAt2900) {
  EXPECT_LE(required_n(0.1, 0.1, 10, GuaranteeVariant::umd_original_conditional), 2900u);
}

TEST(RequiredN, SingleBinClosedForm) {
  for (double eps : {0.05, 0.1, 0.2, 0.33}) {
    for (double alpha : {0.05, 0.1, 0.3}) {
      const double closed = std::ceil(std::log(2.0 / alpha) / (2 * eps * eps)) + 1;
      const auto n = required_n(eps, alpha, 1, GuaranteeVariant::umd_conditional);
      EXPECT_NEAR(static_cast<double>(n), std::max(closed, 2.0), 1.0);
    }
  }
  EXPECT_LE(required_n(0.1, 0.1, 1, GuaranteeVariant::umd_conditional), 151u);
}

TEST(RequiredN, RejectsInfeasibleEpsilon) {
  EXPECT_THROW(required_n(0.01, 0.1, 10, GuaranteeVariant::randomized_marginal, 0.02), Error);
  EXPECT_THROW(required_n(0.0, 0.1, 10, GuaranteeVariant::umd_conditional), Error);
}

TEST(BoundCurve, ReferencePointsAndLength) {
  const auto c1 = bound_curve(1000, 0.1, 1, 600);
  EXPECT_EQ(c1.points.size(), 500u);
  EXPECT_EQ(c1.skipped.size(), 100u);
  EXPECT_LE(c1.points[4].epsilon, 0.12);
  EXPECT_EQ(c1.points[4].bins, 5u);
  EXPECT_NEAR(c1.points[0].epsilon, hoeffding_halfwidth(999, 0.1), 1e-15);
  EXPECT_LE(bound_curve(5000, 0.1, 10, 10).points[0].epsilon, 0.08);
  EXPECT_LE(bound_curve(20000, 0.1, 22, 22).points[0].epsilon, 0.06);
}

TEST(UmsRequiredN, TenBinChain) {
  const auto u = ums_required_n(0.1, 0.1, 10);
  EXPECT_EQ(u.n_min, 300u);
  EXPECT_EQ(u.n_split1, static_cast<std::size_t>(std::ceil(1000 * std::log(4000.0))));
  EXPECT_EQ(u.n_total, u.n_split1 + u.n_split2);
  EXPECT_GE(u.n_split2, 9300u);
  EXPECT_LE(u.n_split2, 9700u);
}

TEST(UmsRequiredN, SplitTwoIsSmallestFeasible) {
  for (double eps : {0.05, 0.1, 0.2}) {
    for (std::size_t b : {1u, 5u, 10u, 20u}) {
      const auto u = ums_required_n(eps, 0.1, b);
      const double bb = static_cast<double>(b);
      const double l = std::log(2 * bb / 0.025);
      auto ok = [&](std::size_t m) {
        const double md = static_cast<double>(m);
        return md / (2 * bb) - std::sqrt(md * l / 2) >= static_cast<double>(u.n_min);
      };
      const auto want = oracle::linear_scan(1, ok);
      EXPECT_EQ(u.n_split2, want);
    }
  }
}

TEST(UmsRequiredN, NonincreasingInEpsilon) {
  std::size_t prev = ums_required_n(0.02, 0.1, 10).n_total;
  for (double eps = 0.03; eps < 0.9; eps += 0.01) {
    const auto n = ums_required_n(eps, 0.1, 10).n_total;
    ASSERT_LE(n, prev);
    prev = n;
  }
}

TEST(GuaranteeVariantNames, RoundTrip) {
  for (auto v : kVariants) EXPECT_EQ(parse_guarantee_variant(to_string(v)), v);
  EXPECT_FALSE(parse_guarantee_variant("nope"));
}

}  // namespace
}  // namespace histcal
