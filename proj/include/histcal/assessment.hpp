#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "histcal/errors.hpp"
#include "histcal/model.hpp"
#include "histcal/stats.hpp"

namespace histcal {

/// Exact law of a discrete predictor: P(h = r) and E[Y | h = r] per value r.
class DiscretePredictorDistribution {
 public:
  struct Atom {
    double prediction;
    double mass;
    double mean;
  };

  explicit DiscretePredictorDistribution(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw config_error("distribution needs at least one atom");
    double total = 0.0;
    for (const auto& a : atoms_) {
      const bool ok = a.prediction >= 0.0 && a.prediction <= 1.0 && a.mass >= 0.0 &&
                      a.mass <= 1.0 && a.mean >= 0.0 && a.mean <= 1.0;
      if (!ok) throw config_error("distribution atom outside [0, 1]");
      total += a.mass;
    }
    if (std::abs(total - 1.0) > 1e-12) throw config_error("distribution masses must sum to 1");
    std::vector<double> preds;
    for (const auto& a : atoms_) preds.push_back(a.prediction);
    std::sort(preds.begin(), preds.end());
    if (std::adjacent_find(preds.begin(), preds.end()) != preds.end()) {
      throw config_error("distribution predictions must be distinct");
    }
  }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }

 private:
  std::vector<Atom> atoms_;
};

/// Exact lp-ECE of a discrete predictor, p >= 1.
inline double ece_discrete(const DiscretePredictorDistribution& dist, double p) {
  if (!(p >= 1.0)) throw config_error("ECE order p must be at least 1");
  CompensatedSum s;
  for (const auto& a : dist.atoms()) s.add(a.mass * std::pow(std::abs(a.mean - a.prediction), p));
  return std::pow(s.value(), 1.0 / p);
}

/// Largest |E[Y|h=r] - r| over atoms with positive mass (the l-infinity ECE).
inline double max_deviation(const DiscretePredictorDistribution& dist) {
  double m = 0.0;
  for (const auto& a : dist.atoms()) {
    if (a.mass > 0.0) m = std::max(m, std::abs(a.mean - a.prediction));
  }
  return m;
}

/// Test-set label mean per distinct prediction value.
struct PredictionGroup {
  double prediction;
  double mean;
  std::size_t count;
};

inline std::vector<PredictionGroup> empirical_bin_means(std::span<const double> predictions,
                                                        std::span<const int> labels) {
  if (predictions.empty()) throw data_error("test set is empty");
  if (predictions.size() != labels.size()) throw data_error("prediction and label counts differ");
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return predictions[i] < predictions[j]; });

  std::vector<PredictionGroup> groups;
  std::size_t positives = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (groups.empty() || groups.back().prediction != predictions[i]) {
      if (!groups.empty()) {
        groups.back().mean = static_cast<double>(positives) / static_cast<double>(groups.back().count);
      }
      groups.push_back({predictions[i], 0.0, 0});
      positives = 0;
    }
    ++groups.back().count;
    positives += static_cast<std::size_t>(labels[i]);
  }
  groups.back().mean = static_cast<double>(positives) / static_cast<double>(groups.back().count);
  return groups;
}

inline std::vector<PredictionGroup> empirical_bin_means(const BinningModel& model, const Dataset& test,
                                                        SeededRng* rng = nullptr) {
  const auto preds = predict_all(model, test, rng);
  const auto labels = test.labels();
  return empirical_bin_means(preds, labels);
}

/// Evenly spaced epsilon grid on [0, 1].
inline std::vector<double> make_grid(std::size_t points = 1001) {
  if (points < 2) throw config_error("grid needs at least two points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  }
  g.back() = 1.0;
  return g;
}

/// Right-continuous step function eps -> V(eps), kept both on a display grid
/// and as its exact jumps (deviation, mass), which are what AUC uses.
struct ValidityCurve {
  struct Jump {
    double deviation;
    double mass;
  };
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<Jump> jumps;  // strictly increasing deviations

  double at(double eps) const {
    double v = 0.0;
    for (const auto& j : jumps) {
      if (j.deviation <= eps) v += j.mass;
    }
    return std::min(v, 1.0);
  }
};

namespace detail {

inline void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw config_error("epsilon grid is empty");
  if (!std::is_sorted(grid.begin(), grid.end())) throw config_error("epsilon grid must be increasing");
}

/// Builds a curve from (deviation, weight) pairs where weights are integer
/// counts over `total`, so the values hit exactly 1 once every count is in.
inline ValidityCurve curve_from_counts(std::vector<std::pair<double, std::size_t>> dev_counts,
                                       std::size_t total, const std::vector<double>& grid) {
  check_grid(grid);
  std::sort(dev_counts.begin(), dev_counts.end());
  std::vector<std::pair<double, std::size_t>> merged;
  for (const auto& dc : dev_counts) {
    if (!merged.empty() && merged.back().first == dc.first) {
      merged.back().second += dc.second;
    } else {
      merged.push_back(dc);
    }
  }
  ValidityCurve c;
  c.grid = grid;
  const double n = static_cast<double>(total);
  for (const auto& [dev, cnt] : merged) c.jumps.push_back({dev, static_cast<double>(cnt) / n});

  c.values.resize(grid.size());
  std::size_t k = 0;
  std::size_t cumulative = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    while (k < merged.size() && merged[k].first <= grid[g]) cumulative += merged[k++].second;
    c.values[g] = static_cast<double>(cumulative) / n;
  }
  return c;
}

}  // namespace detail

/// Marginal validity plot: fraction of test points whose prediction's
/// empirical deviation |mean - r| is at most eps.
inline ValidityCurve validity_marginal(std::span<const double> predictions, std::span<const int> labels,
                                       const std::vector<double>& grid) {
  const auto groups = empirical_bin_means(predictions, labels);
  std::vector<std::pair<double, std::size_t>> dc;
  for (const auto& g : groups) dc.emplace_back(std::abs(g.mean - g.prediction), g.count);
  return detail::curve_from_counts(std::move(dc), predictions.size(), grid);
}

/// Conditional validity plot for one test set: 1 when every attained
/// prediction value has empirical deviation at most eps, else 0.
inline ValidityCurve validity_conditional(std::span<const double> predictions,
                                          std::span<const int> labels, const std::vector<double>& grid) {
  const auto groups = empirical_bin_means(predictions, labels);
  double worst = 0.0;
  for (const auto& g : groups) worst = std::max(worst, std::abs(g.mean - g.prediction));
  return detail::curve_from_counts({{worst, 1}}, 1, grid);
}

/// lp plugin ECE on the test set, grouping by prediction value.
inline double plugin_ece(std::span<const double> predictions, std::span<const int> labels, double p) {
  if (!(p >= 1.0)) throw config_error("ECE order p must be at least 1");
  const auto groups = empirical_bin_means(predictions, labels);
  const double n = static_cast<double>(predictions.size());
  CompensatedSum s;
  for (const auto& g : groups) {
    s.add(static_cast<double>(g.count) / n * std::pow(std::abs(g.mean - g.prediction), p));
  }
  return std::pow(s.value(), 1.0 / p);
}

inline ValidityCurve validity_marginal(const BinningModel& model, const Dataset& test,
                                       const std::vector<double>& grid, SeededRng* rng = nullptr) {
  const auto preds = predict_all(model, test, rng);
  const auto labels = test.labels();
  return validity_marginal(preds, labels, grid);
}

inline ValidityCurve validity_conditional(const BinningModel& model, const Dataset& test,
                                          const std::vector<double>& grid, SeededRng* rng = nullptr) {
  const auto preds = predict_all(model, test, rng);
  const auto labels = test.labels();
  return validity_conditional(preds, labels, grid);
}

inline double plugin_ece(const BinningModel& model, const Dataset& test, double p,
                         SeededRng* rng = nullptr) {
  const auto preds = predict_all(model, test, rng);
  const auto labels = test.labels();
  return plugin_ece(preds, labels, p);
}

/// Exact validity curve of a known discrete predictor.
inline ValidityCurve validity_curve(const DiscretePredictorDistribution& dist,
                                    const std::vector<double>& grid) {
  detail::check_grid(grid);
  ValidityCurve c;
  c.grid = grid;
  std::vector<ValidityCurve::Jump> jumps;
  for (const auto& a : dist.atoms()) jumps.push_back({std::abs(a.mean - a.prediction), a.mass});
  std::sort(jumps.begin(), jumps.end(),
            [](const auto& x, const auto& y) { return x.deviation < y.deviation; });
  for (const auto& j : jumps) {
    if (!c.jumps.empty() && c.jumps.back().deviation == j.deviation) {
      c.jumps.back().mass += j.mass;
    } else {
      c.jumps.push_back(j);
    }
  }
  c.values.reserve(grid.size());
  for (double eps : grid) c.values.push_back(c.at(eps));
  return c;
}

/// Exact area under the step function on [0, 1], from its jumps.
inline double curve_auc(const ValidityCurve& curve) {
  CompensatedSum s;
  for (const auto& j : curve.jumps) {
    if (j.deviation <= 1.0) s.add(j.mass * (1.0 - j.deviation));
  }
  return s.value();
}

struct AggregatedCurve {
  std::vector<double> grid;
  std::vector<double> mean;
  std::vector<double> stderr_;
  std::size_t runs = 0;
};

/// Per-grid-point mean and standard error across runs.
inline AggregatedCurve aggregate_curves(std::span<const ValidityCurve> curves) {
  if (curves.empty()) throw config_error("no curves to aggregate");
  const auto& grid = curves.front().grid;
  for (const auto& c : curves) {
    if (c.grid != grid || c.values.size() != grid.size()) {
      throw config_error("curves to aggregate must share one grid");
    }
  }
  AggregatedCurve out;
  out.grid = grid;
  out.runs = curves.size();
  out.mean.resize(grid.size());
  out.stderr_.resize(grid.size());
  std::vector<double> column(curves.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t r = 0; r < curves.size(); ++r) column[r] = curves[r].values[g];
    const auto ms = mean_stderr(column);
    out.mean[g] = ms.mean;
    out.stderr_[g] = ms.stderr_;
  }
  return out;
}

}  // namespace histcal
