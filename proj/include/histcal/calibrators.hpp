#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "histcal/errors.hpp"
#include "histcal/model.hpp"
#include "histcal/rng.hpp"

namespace histcal {

/// Order-statistic boundary indices A_0 < A_1 < ... < A_B.
///
/// A_0 = 0, A_B = n+1 and A_b = ceil(b (n+1) / B) otherwise. Positions are
/// 1-based into the sorted sample, with 0 and n+1 standing for the fixed
/// pseudo order statistics 0 and 1. Requires n >= 2B, which guarantees
/// A_b - A_{b-1} >= floor(n/B).
using EdgeIndexArray = std::vector<std::size_t>;

inline EdgeIndexArray uniform_mass_edges(std::size_t n, std::size_t bins) {
  if (bins < 1) throw config_error("B must be at least 1");
  if (n < 2 * bins) {
    throw config_error("uniform-mass binning requires n >= 2B (n = " + std::to_string(n) +
                       ", B = " + std::to_string(bins) + ")");
  }
  EdgeIndexArray a(bins + 1);
  a[0] = 0;
  for (std::size_t b = 1; b < bins; ++b) a[b] = (b * (n + 1) + bins - 1) / bins;
  a[bins] = n + 1;
  return a;
}

struct RandomizationParams {
  double delta = 1e-10;
  SeededRng rng{0};
};

namespace detail {

inline void check_delta(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw config_error("randomization delta must be positive and finite");
  }
}

/// Indices that sort `data` by score; ties keep input order.
inline std::vector<std::size_t> score_order(const Dataset& data) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return data[i].score < data[j].score;
  });
  return order;
}

/// Shared uniform-mass core. `values[i]` is what gets averaged for sample i
/// (labels for UMD, scaler outputs for scaling-binning). With
/// `include_upper_boundary` the sample at position A_b joins bin b for b < B.
inline BinningModel uniform_mass_fit(const Dataset& data, std::span<const double> values,
                                     std::size_t bins, bool include_upper_boundary) {
  const std::size_t n = data.size();
  const auto a = uniform_mass_edges(n, bins);
  const auto order = score_order(data);

  std::vector<double> edges(bins + 1);
  edges.front() = 0.0;
  edges.back() = 1.0;
  for (std::size_t b = 1; b < bins; ++b) edges[b] = data[order[a[b] - 1]].score;

  std::vector<double> biases(bins);
  for (std::size_t b = 1; b <= bins; ++b) {
    const std::size_t lo = a[b - 1];
    std::size_t hi = a[b];  // exclusive upper position
    if (include_upper_boundary && b < bins) ++hi;
    if (hi <= lo + 1) throw config_error("bin " + std::to_string(b) + " has no points");
    double sum = 0.0;
    for (std::size_t pos = lo + 1; pos < hi; ++pos) sum += values[order[pos - 1]];
    biases[b - 1] = sum / static_cast<double>(hi - lo - 1);
  }
  return BinningModel(std::move(edges), std::move(biases));
}

inline std::vector<double> label_values(const Dataset& data) {
  std::vector<double> v(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) v[i] = data[i].label;
  return v;
}

}  // namespace detail

/// Uniform-mass binning with double dipping. Labels of the B-1 boundary
/// samples are left out of every bias. Scores must be tie-free; route tied
/// data through `perturb_scores` first.
inline BinningModel fit_umd(const Dataset& data, std::size_t bins) {
  const auto y = detail::label_values(data);
  return detail::uniform_mass_fit(data, y, bins, false);
}

/// Original histogram binning: bins b < B also average their upper boundary label.
inline BinningModel fit_umd_original(const Dataset& data, std::size_t bins) {
  const auto y = detail::label_values(data);
  return detail::uniform_mass_fit(data, y, bins, true);
}

/// Replaces each score s with (s + delta*u)/(1 + delta), u ~ Uniform[0,1].
///
/// Exact collisions after rounding are redrawn so that the result is tie-free
/// whenever delta is large enough to be representable around the scores.
inline Dataset perturb_scores(const Dataset& data, RandomizationParams& params) {
  detail::check_delta(params.delta);
  std::vector<ScoredSample> out(data.samples());
  for (auto& s : out) s.score = perturb_score(s.score, params.delta, params.rng);

  constexpr int kMaxRedraws = 64;
  for (int round = 0; round < kMaxRedraws; ++round) {
    std::vector<std::size_t> order(out.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
      return out[i].score < out[j].score || (out[i].score == out[j].score && i < j);
    });
    bool tied = false;
    for (std::size_t k = 1; k < order.size(); ++k) {
      if (out[order[k]].score == out[order[k - 1]].score) {
        tied = true;
        const std::size_t i = order[k];
        out[i].score = perturb_score(data[i].score, params.delta, params.rng);
      }
    }
    if (!tied) break;
  }
  return Dataset(std::move(out));
}

/// Randomized UMD: perturbed scores, UMD core, then each bias p becomes
/// (p + delta*v)/(1 + delta) with v ~ Uniform[0,1]. The returned model
/// carries delta so queries are perturbed too.
inline BinningModel fit_randomized_umd(const Dataset& data, std::size_t bins,
                                       RandomizationParams& params) {
  const Dataset perturbed = perturb_scores(data, params);
  const BinningModel core = fit_umd(perturbed, bins);

  std::vector<double> biases(core.biases());
  constexpr int kMaxRedraws = 64;
  for (std::size_t b = 0; b < biases.size(); ++b) {
    const double pre = core.biases()[b];
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
      biases[b] = randomize(pre, params.delta, params.rng.uniform());
      const auto prev = biases.begin() + static_cast<std::ptrdiff_t>(b);
      if (std::find(biases.begin(), prev, biases[b]) == prev) break;
    }
  }
  return BinningModel(core.edges(), std::move(biases), params.delta);
}

/// Uniform-mass binning with sample splitting: a random ceil(f*n) points set
/// the edges, the rest estimate the biases.
inline BinningModel fit_ums(const Dataset& data, std::size_t bins, double split_fraction,
                            SeededRng& rng) {
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw config_error("split fraction must lie in (0, 1)");
  }
  const std::size_t n = data.size();
  const auto n1 = static_cast<std::size_t>(std::ceil(split_fraction * static_cast<double>(n)));
  if (n1 == 0 || n1 >= n) throw config_error("sample split leaves an empty half");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng.engine());

  std::vector<double> first;
  first.reserve(n1);
  for (std::size_t k = 0; k < n1; ++k) first.push_back(data[idx[k]].score);
  std::sort(first.begin(), first.end());
  const auto a = uniform_mass_edges(n1, bins);

  std::vector<double> edges(bins + 1);
  edges.front() = 0.0;
  edges.back() = 1.0;
  for (std::size_t b = 1; b < bins; ++b) edges[b] = first[a[b] - 1];

  const BinningModel shape(edges, std::vector<double>(bins, 0.0));
  std::vector<double> sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t k = n1; k < n; ++k) {
    const auto& s = data[idx[k]];
    const std::size_t b = assign_bin(shape, s.score) - 1;
    sum[b] += s.label;
    ++count[b];
  }
  std::vector<double> biases(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) {
      throw config_error("bin " + std::to_string(b + 1) + " received no second-split points");
    }
    biases[b] = sum[b] / static_cast<double>(count[b]);
  }
  return BinningModel(std::move(edges), std::move(biases));
}

/// Equal-width bins [0,1/B), ..., [1-1/B, 1]. Empty bins predict their midpoint.
inline BinningModel fit_fixed_width(const Dataset& data, std::size_t bins) {
  if (bins < 1) throw config_error("B must be at least 1");
  std::vector<double> edges(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) {
    edges[b] = static_cast<double>(b) / static_cast<double>(bins);
  }
  const BinningModel shape(edges, std::vector<double>(bins, 0.0));
  std::vector<double> sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (const auto& s : data) {
    const std::size_t b = assign_bin(shape, s.score) - 1;
    sum[b] += s.label;
    ++count[b];
  }
  std::vector<double> biases(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    biases[b] = count[b] ? sum[b] / static_cast<double>(count[b])
                         : (2.0 * static_cast<double>(b) + 1.0) / (2.0 * static_cast<double>(bins));
  }
  return BinningModel(std::move(edges), std::move(biases));
}

/// Isotonic regression by pool-adjacent-violators.
///
/// Tied scores are pooled first so the fit is a function of the score.
/// Adjacent blocks with equal means are merged, so the biases are strictly
/// increasing and every block is one bin. Edges sit midway between the last
/// score of a block and the first score of the next.
inline BinningModel fit_isotonic(const Dataset& data) {
  struct Block {
    double sum;
    double weight;
    double first_score;
    double last_score;
    double mean() const { return sum / weight; }
  };
  const auto order = detail::score_order(data);

  std::vector<Block> blocks;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& s = data[order[k]];
    if (!blocks.empty() && blocks.back().last_score == s.score) {
      blocks.back().sum += s.label;
      blocks.back().weight += 1.0;
    } else {
      blocks.push_back({static_cast<double>(s.label), 1.0, s.score, s.score});
    }
    // Restore strict monotonicity against the left neighbour.
    while (blocks.size() > 1) {
      Block& right = blocks.back();
      Block& left = blocks[blocks.size() - 2];
      if (left.mean() < right.mean()) break;
      left.sum += right.sum;
      left.weight += right.weight;
      left.last_score = right.last_score;
      blocks.pop_back();
    }
  }

  std::vector<double> edges{0.0};
  std::vector<double> biases;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    biases.push_back(blocks[k].mean());
    if (k + 1 < blocks.size()) {
      const double lo = blocks[k].last_score;
      const double hi = blocks[k + 1].first_score;
      double mid = lo + (hi - lo) / 2.0;
      if (mid <= lo) mid = hi;
      edges.push_back(mid);
    }
  }
  edges.push_back(1.0);
  return BinningModel(std::move(edges), std::move(biases));
}

/// Double-dip scaling-binning: UMD edges, but each bias averages the scaler
/// outputs at the interior positions instead of the labels.
inline BinningModel fit_scaling_binning(const Dataset& data, std::span<const double> scaled_scores,
                                        std::size_t bins) {
  if (scaled_scores.size() != data.size()) {
    throw config_error("scaled scores must match the dataset size");
  }
  for (double s : scaled_scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw data_error("scaled score outside [0, 1]");
  }
  return detail::uniform_mass_fit(data, scaled_scores, bins, false);
}

enum class Calibrator {
  umd,
  umd_original,
  umd_randomized,
  ums,
  fixed_width,
  isotonic,
  scaling_binning,
};

inline constexpr Calibrator kAllCalibrators[] = {
    Calibrator::umd,         Calibrator::umd_original, Calibrator::umd_randomized,
    Calibrator::ums,         Calibrator::fixed_width,  Calibrator::isotonic,
    Calibrator::scaling_binning,
};

inline std::string_view to_string(Calibrator c) {
  switch (c) {
    case Calibrator::umd: return "umd";
    case Calibrator::umd_original: return "umd-original";
    case Calibrator::umd_randomized: return "umd-randomized";
    case Calibrator::ums: return "ums";
    case Calibrator::fixed_width: return "fixed-width";
    case Calibrator::isotonic: return "isotonic";
    case Calibrator::scaling_binning: return "scaling-binning";
  }
  return "?";
}

inline std::optional<Calibrator> parse_calibrator(std::string_view name) {
  for (auto c : kAllCalibrators) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

struct FitOptions {
  std::size_t bins = 10;
  double delta = 1e-10;
  double split_fraction = 0.5;
  // Scaler outputs for scaling-binning; empty means "use the scores themselves".
  std::vector<double> scaled_scores;
};

/// Fits any calibrator. Randomness (umd-randomized, ums) comes from `rng`.
inline BinningModel fit(Calibrator kind, const Dataset& data, const FitOptions& opts,
                        SeededRng& rng) {
  switch (kind) {
    case Calibrator::umd:
      return fit_umd(data, opts.bins);
    case Calibrator::umd_original:
      return fit_umd_original(data, opts.bins);
    case Calibrator::umd_randomized: {
      RandomizationParams params{opts.delta, SeededRng(rng.engine()())};
      return fit_randomized_umd(data, opts.bins, params);
    }
    case Calibrator::ums:
      return fit_ums(data, opts.bins, opts.split_fraction, rng);
    case Calibrator::fixed_width:
      return fit_fixed_width(data, opts.bins);
    case Calibrator::isotonic:
      return fit_isotonic(data);
    case Calibrator::scaling_binning:
      if (opts.scaled_scores.empty()) {
        const auto s = data.scores();
        return fit_scaling_binning(data, s, opts.bins);
      }
      return fit_scaling_binning(data, opts.scaled_scores, opts.bins);
  }
  throw config_error("unknown calibrator");
}

}  // namespace histcal
