#include "histcal/model.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

namespace histcal {
namespace {

BinningModel two_bins() { return BinningModel({0.0, 0.3, 1.0}, {0.5, 1.0}); }

TEST(AssignBin, HalfOpenBoundaryGoesRight) { EXPECT_EQ(assign_bin(two_bins(), 0.3), 2u); }

TEST(AssignBin, ScoreOneLandsInLastBin) { EXPECT_EQ(assign_bin(two_bins(), 1.0), 2u); }

TEST(AssignBin, InteriorPoint) {
  EXPECT_EQ(assign_bin(two_bins(), 0.29), 1u);
  EXPECT_EQ(assign_bin(two_bins(), 0.0), 1u);
}

TEST(AssignBin, RejectsOutOfRangeScores) {
  EXPECT_THROW(assign_bin(two_bins(), -0.01), Error);
  EXPECT_THROW(assign_bin(two_bins(), 1.01), Error);
  EXPECT_THROW(assign_bin(two_bins(), std::nan("")), Error);
}

TEST(Predict, LooksUpBias) {
  EXPECT_DOUBLE_EQ(predict(two_bins(), 0.1), 0.5);
  EXPECT_DOUBLE_EQ(predict(two_bins(), 0.7), 1.0);
}

TEST(Predict, SingleBinIsConstant) {
  const BinningModel m({0.0, 1.0}, {0.4});
  for (double s : {0.0, 0.25, 0.5, 1.0}) EXPECT_DOUBLE_EQ(predict(m, s), 0.4);
}

TEST(Predict, ZeroBiases) {
  const BinningModel m({0.0, 0.2, 0.5, 1.0}, {0.0, 0.0, 0.0});
  for (double s : {0.0, 0.3, 0.9, 1.0}) EXPECT_EQ(predict(m, s), 0.0);
}

TEST(BinningModel, RejectsBrokenInvariants) {
  EXPECT_THROW(BinningModel({0.1, 1.0}, {0.5}), Error);
  EXPECT_THROW(BinningModel({0.0, 0.9}, {0.5}), Error);
  EXPECT_THROW(BinningModel({0.0, 0.6, 0.4, 1.0}, {0.1, 0.2, 0.3}), Error);
  EXPECT_THROW(BinningModel({0.0, 1.0}, {1.5}), Error);
  EXPECT_THROW(BinningModel({0.0, 0.5, 1.0}, {0.5}), Error);
}

TEST(Dataset, RejectsBadSamples) {
  EXPECT_THROW(Dataset(std::vector<ScoredSample>{}), Error);
  EXPECT_THROW(Dataset({{1.2, 0}}), Error);
  EXPECT_THROW(Dataset({{0.2, 2}}), Error);
}

// Every score maps to exactly one bin, the bin containing it, and predictions
// only take bias values.
TEST(AssignBin, PartitionsUnitIntervalProperty) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const int bins = 1 + static_cast<int>(gen() % 12);
    std::vector<double> edges{0.0, 1.0};
    for (int b = 1; b < bins; ++b) edges.push_back(u(gen));
    std::sort(edges.begin(), edges.end());
    std::vector<double> biases(bins);
    for (auto& b : biases) b = u(gen);
    const BinningModel m(edges, biases);
    const std::set<double> allowed(biases.begin(), biases.end());
    for (int k = 0; k < 200; ++k) {
      const double s = k == 0 ? 1.0 : (k == 1 ? 0.0 : u(gen));
      const std::size_t b = assign_bin(m, s);
      ASSERT_GE(b, 1u);
      ASSERT_LE(b, m.bins());
      if (b < m.bins()) {
        ASSERT_LE(edges[b - 1], s);
        ASSERT_LT(s, edges[b]);
      } else {
        ASSERT_LE(edges[b - 1], s);
      }
      ASSERT_TRUE(allowed.count(predict(m, s)));
    }
  }
}

TEST(ModelText, FormatIsThreeLines) {
  EXPECT_EQ(to_text(two_bins()), "2\n0 0.3 1\n0.5 1\n");
}

TEST(ModelText, RoundTripIsExactProperty) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 300; ++rep) {
    const int bins = 1 + static_cast<int>(gen() % 20);
    std::vector<double> edges{0.0, 1.0};
    for (int b = 1; b < bins; ++b) edges.push_back(u(gen));
    std::sort(edges.begin(), edges.end());
    std::vector<double> biases(bins);
    for (auto& b : biases) b = u(gen);
    const double delta = rep % 3 == 0 ? u(gen) * 1e-9 : 0.0;
    const BinningModel m(edges, biases, delta);
    EXPECT_EQ(model_from_text(to_text(m)), m);
  }
}

TEST(ModelText, ParseErrors) {
  EXPECT_THROW(model_from_text(""), Error);
  EXPECT_THROW(model_from_text("2\n0 0.5 1\n0.1\n"), Error);
  EXPECT_THROW(model_from_text("1\n0 1\nabc\n"), Error);
  EXPECT_THROW(model_from_text("1\n0 1\n0.5\nbogus 3\n"), Error);
  EXPECT_THROW(model_from_text("1\n0.2 1\n0.5\n"), Error);
}

TEST(Predict, RandomizedQueryPerturbationStaysWithinDelta) {
  const BinningModel m({0.0, 0.5, 1.0}, {0.2, 0.8}, 1e-3);
  SeededRng rng(3);
  // Far from the edge the perturbation cannot change the bin.
  for (int i = 0; i < 100; ++i) EXPECT_EQ(predict(m, 0.3, rng), 0.2);
  // Straddling the edge, both outcomes occur.
  std::set<double> seen;
  for (int i = 0; i < 200; ++i) seen.insert(predict(m, 0.5 - 2e-4, rng));
  EXPECT_EQ(seen.size(), 2u);
}

}  // namespace
}  // namespace histcal
