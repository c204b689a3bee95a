#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "histcal/model.hpp"

namespace fixture {

inline histcal::Dataset make(const std::vector<double>& scores, const std::vector<int>& labels) {
  return histcal::Dataset(scores, labels);
}

/// Scores 0.1..0.5 with labels 0,1,0,1,1.
inline histcal::Dataset five_points() {
  return make({0.1, 0.2, 0.3, 0.4, 0.5}, {0, 1, 0, 1, 1});
}

/// n tie-free uniform scores with Bernoulli(score) labels.
inline histcal::Dataset random_dataset(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<histcal::ScoredSample> s(n);
  for (auto& x : s) {
    x.score = u(rng);
    x.label = u(rng) < x.score ? 1 : 0;
  }
  return histcal::Dataset(std::move(s));
}

struct ModelAndTest {
  histcal::BinningModel model;
  histcal::Dataset test;
};

/// Random model (1..10 bins, biases on a 0.01 lattice with occasional
/// repeats) paired with a random test set of 1..300 points.
inline ModelAndTest random_pair(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> bdist(1, 10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t bins = bdist(rng);
  std::vector<double> edges{0.0};
  for (std::size_t b = 1; b < bins; ++b) edges.push_back(u(rng));
  std::sort(edges.begin() + 1, edges.end());
  edges.push_back(1.0);
  std::vector<double> biases;
  for (std::size_t b = 0; b < bins; ++b) {
    biases.push_back(b > 0 && u(rng) < 0.2 ? biases.back() : std::round(u(rng) * 100) / 100);
  }
  std::uniform_int_distribution<std::size_t> ndist(1, 300);
  return {histcal::BinningModel(edges, biases), random_dataset(rng, ndist(rng))};
}

}  // namespace fixture
