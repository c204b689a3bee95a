#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "histcal/errors.hpp"
#include "histcal/format.hpp"
#include "histcal/rng.hpp"

namespace histcal {

struct ScoredSample {
  double score = 0.0;
  int label = 0;
};

inline void check_score(double score) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw data_error("score " + exact(score) + " is outside [0, 1]");
  }
}

inline void check_label(int label) {
  if (label != 0 && label != 1) {
    throw data_error("label " + std::to_string(label) + " is not 0 or 1");
  }
}

/// Non-empty list of scored samples; every score in [0,1], every label in {0,1}.
class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(std::vector<ScoredSample> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) throw data_error("dataset is empty");
    for (const auto& s : samples_) {
      check_score(s.score);
      check_label(s.label);
    }
  }

  Dataset(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
      throw data_error("score and label counts differ");
    }
    std::vector<ScoredSample> samples(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) samples[i] = {scores[i], labels[i]};
    *this = Dataset(std::move(samples));
  }

  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  const ScoredSample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<ScoredSample>& samples() const noexcept { return samples_; }

  std::vector<double> scores() const {
    std::vector<double> out(samples_.size());
    std::transform(samples_.begin(), samples_.end(), out.begin(),
                   [](const ScoredSample& s) { return s.score; });
    return out;
  }

  std::vector<int> labels() const {
    std::vector<int> out(samples_.size());
    std::transform(samples_.begin(), samples_.end(), out.begin(),
                   [](const ScoredSample& s) { return s.label; });
    return out;
  }

  auto begin() const noexcept { return samples_.begin(); }
  auto end() const noexcept { return samples_.end(); }

 private:
  std::vector<ScoredSample> samples_;
};

/// Piecewise-constant calibrated predictor.
///
/// `edges` holds B+1 score values with edges.front() == 0 and
/// edges.back() == 1; bin b (1-based) is [edges[b-1], edges[b]) except the
/// last bin, which is closed at 1. `biases` holds the B per-bin predictions.
///
/// A positive `score_delta` marks a model fitted on perturbed scores: queries
/// must be perturbed the same way before lookup (see `predict` with an rng).
class BinningModel {
 public:
  BinningModel() : edges_{0.0, 1.0}, biases_{0.0} {}

  BinningModel(std::vector<double> edges, std::vector<double> biases,
               double score_delta = 0.0)
      : edges_(std::move(edges)), biases_(std::move(biases)), score_delta_(score_delta) {
    if (biases_.empty()) throw config_error("model needs at least one bin");
    if (edges_.size() != biases_.size() + 1) {
      throw config_error("model needs B+1 edges for B biases");
    }
    if (edges_.front() != 0.0 || edges_.back() != 1.0) {
      throw config_error("model edges must start at 0 and end at 1");
    }
    if (!std::is_sorted(edges_.begin(), edges_.end())) {
      throw config_error("model edges must be nondecreasing");
    }
    for (double b : biases_) {
      if (!(b >= 0.0 && b <= 1.0)) throw config_error("model bias outside [0, 1]");
    }
    if (!(score_delta_ >= 0.0) || !std::isfinite(score_delta_)) {
      throw config_error("score perturbation must be finite and nonnegative");
    }
  }

  std::size_t bins() const noexcept { return biases_.size(); }
  const std::vector<double>& edges() const noexcept { return edges_; }
  const std::vector<double>& biases() const noexcept { return biases_; }
  double score_delta() const noexcept { return score_delta_; }
  bool randomized() const noexcept { return score_delta_ > 0.0; }

  friend bool operator==(const BinningModel&, const BinningModel&) = default;

 private:
  std::vector<double> edges_;
  std::vector<double> biases_;
  double score_delta_ = 0.0;
};

/// 1-based bin index of `score`.
inline std::size_t assign_bin(const BinningModel& model, double score) {
  check_score(score);
  const auto& e = model.edges();
  // Number of interior edges <= score, over e[1..B-1].
  const auto interior_end = e.end() - 1;
  const auto it = std::upper_bound(e.begin() + 1, interior_end, score);
  return static_cast<std::size_t>(it - (e.begin() + 1)) + 1;
}

inline double predict(const BinningModel& model, double score) {
  return model.biases()[assign_bin(model, score) - 1];
}

/// (value + delta*u) / (1 + delta); stays in [0,1] and within delta of value.
inline double randomize(double value, double delta, double u) {
  return (value + delta * u) / (1.0 + delta);
}

/// Score perturbation with a fresh u ~ Uniform[0,1].
inline double perturb_score(double score, double delta, SeededRng& rng) {
  return randomize(score, delta, rng.uniform());
}

/// Prediction that applies the model's query-side score perturbation, if any.
inline double predict(const BinningModel& model, double score, SeededRng& rng) {
  check_score(score);
  if (model.randomized()) score = perturb_score(score, model.score_delta(), rng);
  return predict(model, score);
}

inline std::vector<double> predict_all(const BinningModel& model,
                                       std::span<const double> scores,
                                       SeededRng* rng = nullptr) {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = rng ? predict(model, scores[i], *rng) : predict(model, scores[i]);
  }
  return out;
}

inline std::vector<double> predict_all(const BinningModel& model, const Dataset& data,
                                       SeededRng* rng = nullptr) {
  const auto scores = data.scores();
  return predict_all(model, scores, rng);
}

/// Number of samples per bin, in bin order.
inline std::vector<std::size_t> bin_counts(const BinningModel& model, const Dataset& data) {
  std::vector<std::size_t> counts(model.bins(), 0);
  for (const auto& s : data) ++counts[assign_bin(model, s.score) - 1];
  return counts;
}

// Text format: B, then the B+1 edges, then the B biases, one group per line.
// A randomized model adds a fourth line `randomized <delta>`.
inline void write_model(std::ostream& os, const BinningModel& model) {
  os << model.bins() << '\n';
  for (std::size_t i = 0; i < model.edges().size(); ++i) {
    os << (i ? " " : "") << exact(model.edges()[i]);
  }
  os << '\n';
  for (std::size_t i = 0; i < model.biases().size(); ++i) {
    os << (i ? " " : "") << exact(model.biases()[i]);
  }
  os << '\n';
  if (model.randomized()) os << "randomized " << exact(model.score_delta()) << '\n';
}

inline std::string to_text(const BinningModel& model) {
  std::ostringstream os;
  write_model(os, model);
  return os.str();
}

inline BinningModel read_model(std::istream& is) {
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(is, line)) throw parse_error(std::string("model file: missing ") + what);
    return line;
  };
  auto numbers = [](const std::string& text, const char* what) {
    std::vector<double> out;
    std::istringstream ls(text);
    std::string tok;
    while (ls >> tok) out.push_back(to_double(tok, std::string("model ") + what));
    return out;
  };

  const long long bins = to_integer(next_line("bin count"), "model bin count");
  if (bins < 1) throw parse_error("model file: bin count must be positive");
  auto edges = numbers(next_line("edges"), "edge");
  auto biases = numbers(next_line("biases"), "bias");
  if (edges.size() != static_cast<std::size_t>(bins) + 1 ||
      biases.size() != static_cast<std::size_t>(bins)) {
    throw parse_error("model file: edge/bias counts do not match B");
  }
  double delta = 0.0;
  while (std::getline(is, line)) {
    const auto t = trim(line);
    if (t.empty()) continue;
    std::istringstream ls{std::string(t)};
    std::string key, value;
    ls >> key >> value;
    if (key != "randomized") throw parse_error("model file: unexpected line '" + line + "'");
    delta = to_double(value, "model randomization delta");
  }
  try {
    return BinningModel(std::move(edges), std::move(biases), delta);
  } catch (const Error& e) {
    throw parse_error(std::string("model file: ") + e.what());
  }
}

inline BinningModel model_from_text(const std::string& text) {
  std::istringstream is(text);
  return read_model(is);
}

}  // namespace histcal
