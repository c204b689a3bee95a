#include "histcal/experiments.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <sstream>

namespace histcal {
namespace {

TEST(ClopperPearson, ZeroSuccessesClosedForm) {
  // Upper bound solves (1 - p)^n = tail.
  const auto ci = clopper_pearson(500, 0, 0.99);
  EXPECT_EQ(ci.lower, 0.0);
  EXPECT_NEAR(ci.upper, 1.0 - std::pow(0.005, 1.0 / 500.0), 1e-10);
}

TEST(ClopperPearson, AllSuccessesClosedForm) {
  const auto ci = clopper_pearson(50, 50, 0.99);
  EXPECT_NEAR(ci.lower, std::pow(0.005, 1.0 / 50.0), 1e-10);
  EXPECT_EQ(ci.upper, 1.0);
}

TEST(ClopperPearson, ContainsPointEstimate) {
  for (std::size_t k : {1u, 10u, 37u, 99u}) {
    const auto ci = clopper_pearson(100, k, 0.99);
    EXPECT_LT(ci.lower, k / 100.0);
    EXPECT_GT(ci.upper, k / 100.0);
  }
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(257);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw data_error("boom");
                            }),
               Error);
}

TEST(OracleDistribution, PoolsEqualBiases) {
  SyntheticSpec spec;  // uniform scores, identity regression
  const BinningModel m({0.0, 0.5, 1.0}, {0.5, 0.5});
  const auto d = oracle_distribution(m, spec);
  ASSERT_EQ(d.atoms().size(), 1u);
  EXPECT_NEAR(d.atoms()[0].mean, 0.5, 1e-13);
  EXPECT_NEAR(d.atoms()[0].mass, 1.0, 1e-15);
}

TEST(OracleDistribution, ExactBinMeans) {
  SyntheticSpec spec;
  const BinningModel m({0.0, 0.5, 1.0}, {0.2, 0.8});
  const auto d = oracle_distribution(m, spec);
  ASSERT_EQ(d.atoms().size(), 2u);
  EXPECT_NEAR(d.atoms()[0].mean, 0.25, 1e-13);
  EXPECT_NEAR(d.atoms()[1].mean, 0.75, 1e-13);
  EXPECT_NEAR(ece_discrete(d, 1.0), 0.05, 1e-13);
}

TEST(RunCoverage, ConstantRegression) {
  const auto rep = run_coverage(SyntheticSpec::constant(0.5), Calibrator::umd, 400, 4, 0.1, 0.0,
                                60, 3);
  EXPECT_EQ(rep.max_deviation.size(), 60u);
  EXPECT_NEAR(rep.epsilon_conditional, eps_umd(400, 4, 0.1), 0.0);
  // Each bias is a mean of ~99 fair coin flips; deviations near the width are rare.
  EXPECT_LE(rep.failures, 3u);
  for (double d : rep.max_deviation) EXPECT_LT(d, 0.5);
}

TEST(RunCoverage, ZeroTrials) {
  const auto rep = run_coverage(SyntheticSpec{}, Calibrator::umd, 100, 5, 0.1, 0.0, 0, 1);
  EXPECT_EQ(rep.failures, 0u);
  EXPECT_TRUE(rep.max_deviation.empty());
}

TEST(RunCoverage, IndependentOfThreadCount) {
  SyntheticSpec spec;
  parse_regression(spec, "power:2");
  const auto a = run_coverage(spec, Calibrator::umd_randomized, 300, 5, 0.1, 1e-6, 20, 8, 1);
  const auto b = run_coverage(spec, Calibrator::umd_randomized, 300, 5, 0.1, 1e-6, 20, 8, 3);
  EXPECT_EQ(a.max_deviation, b.max_deviation);
  EXPECT_EQ(a.ece_l2, b.ece_l2);
  EXPECT_EQ(a.failures, b.failures);
}

TEST(RunCoverage, RejectsUnsupportedVariant) {
  EXPECT_THROW(run_coverage(SyntheticSpec{}, Calibrator::isotonic, 100, 5, 0.1, 0.0, 1, 1), Error);
  EXPECT_THROW(run_coverage(SyntheticSpec{}, Calibrator::umd, 9, 5, 0.1, 0.0, 1, 1), Error);
}

TEST(TheoryCurve, MatchesWidthInversion) {
  const auto grid = make_grid(101);
  const auto curve = theory_curve(grid, 1500, 10, 0.0, 2.0);
  // At eps equal to the marginal width for alpha = 0.1 the curve reads 0.9.
  const double eps = eps_randomized(1500, 10, 0.1, 0.0, CalibrationMode::marginal);
  const auto at = theory_curve({eps}, 1500, 10, 0.0, 2.0);
  EXPECT_NEAR(at[0], 0.9, 1e-12);
  for (std::size_t g = 1; g < grid.size(); ++g) EXPECT_GE(curve[g], curve[g - 1]);
  EXPECT_EQ(curve[0], 0.0);
}

ComparisonConfig small_config() {
  ComparisonConfig cfg;
  SyntheticSource syn;
  syn.rows = 3000;
  cfg.source = syn;
  cfg.train = 1000;
  cfg.scaler = 500;
  cfg.pool = 1500;
  cfg.n_values = {200, 400};
  cfg.n_test = 500;
  cfg.repetitions = 5;
  cfg.bins = 5;
  cfg.grid_points = 101;
  cfg.methods = {MethodSettings{Calibrator::umd_randomized}, MethodSettings{Calibrator::ums},
                 MethodSettings{Calibrator::isotonic}};
  cfg.seed = 17;
  return cfg;
}

TEST(RunComparison, SmallRun) {
  const auto rep = run_comparison(small_config());
  EXPECT_TRUE(rep.scorer_converged);
  EXPECT_TRUE(rep.scaler_converged);
  ASSERT_EQ(rep.results.size(), 6u);
  for (const auto& r : rep.results) {
    ASSERT_TRUE(r.ok()) << r.error;
    EXPECT_EQ(r.marginal.runs, 5u);
    EXPECT_EQ(r.marginal.mean.size(), 101u);
    for (std::size_t g = 0; g < 101; ++g) {
      EXPECT_LE(r.conditional.mean[g], r.marginal.mean[g] + 1e-15);
    }
    EXPECT_EQ(r.theory_marginal.empty(), r.method != Calibrator::umd_randomized);
  }
}

TEST(RunComparison, Deterministic) {
  auto cfg = small_config();
  cfg.repetitions = 3;
  const auto a = run_comparison(cfg);
  cfg.threads = 2;
  const auto b = run_comparison(cfg);
  ASSERT_EQ(a.results.size(), b.results.size());
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    EXPECT_EQ(a.results[i].marginal.mean, b.results[i].marginal.mean);
    EXPECT_EQ(a.results[i].ece_l1.mean, b.results[i].ece_l1.mean);
  }
}

TEST(RunComparison, ReportsMethodFailure) {
  auto cfg = small_config();
  cfg.bins = 150;  // n = 200 < 2B for UMD
  cfg.repetitions = 1;
  const auto rep = run_comparison(cfg);
  EXPECT_FALSE(rep.results[0].ok());
  EXPECT_NE(rep.results[0].error.find("n >= 2B"), std::string::npos);
}

TEST(ComparisonConfig, Parses) {
  std::istringstream in(R"(# demo
[data]
source = synthetic
rows = 4000
score = beta:2,5
eta = logistic-warp:1.2,0.1
noise_features = 3

[protocol]
train = 1000
scaler = 500
pool = 2500
n = 500, 1000
test = 800
repetitions = 7
seed = 99

[binning]
B = 8
grid = 201

[method umd-randomized]
delta = 1e-9

[method ums]
split_fraction = 0.4
B = 6
)");
  const auto cfg = parse_comparison_config(in);
  const auto& syn = std::get<SyntheticSource>(cfg.source);
  EXPECT_EQ(syn.rows, 4000u);
  EXPECT_EQ(syn.noise_columns, 3u);
  EXPECT_EQ(syn.spec.score, ScoreFamily::beta);
  EXPECT_EQ(syn.spec.regression, RegressionFamily::logistic_warp);
  EXPECT_EQ(cfg.n_values, (std::vector<std::size_t>{500, 1000}));
  EXPECT_EQ(cfg.n_test, 800u);
  EXPECT_EQ(cfg.repetitions, 7u);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.bins, 8u);
  EXPECT_EQ(cfg.grid_points, 201u);
  ASSERT_EQ(cfg.methods.size(), 2u);
  EXPECT_EQ(cfg.methods[0].delta, 1e-9);
  EXPECT_EQ(cfg.methods[1].split_fraction, 0.4);
  EXPECT_EQ(cfg.methods[1].bins, 6u);
}

TEST(ComparisonConfig, Errors) {
  {
    std::istringstream in("[nope]\n");
    EXPECT_THROW(parse_comparison_config(in), Error);
  }
  {
    std::istringstream in("[method platt]\n");
    EXPECT_THROW(parse_comparison_config(in), Error);
  }
  {
    std::istringstream in("[protocol]\nrepetitions = many\n");
    try {
      parse_comparison_config(in, "cfg.ini");
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::parse);
      EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
  }
  {
    std::istringstream in("[data]\nsource = csv\n");
    EXPECT_THROW(parse_comparison_config(in), Error);
  }
}

}  // namespace
}  // namespace histcal
