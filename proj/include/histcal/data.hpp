#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "histcal/errors.hpp"
#include "histcal/format.hpp"
#include "histcal/model.hpp"
#include "histcal/rng.hpp"
#include "histcal/scalers.hpp"

namespace histcal {

/// Feature rows with binary labels, before any scoring.
struct FeatureDataset {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  std::vector<std::string> feature_names;

  std::size_t size() const noexcept { return labels.size(); }
};

inline FeatureDataset subset(const FeatureDataset& data, std::span<const std::size_t> rows) {
  FeatureDataset out;
  out.feature_names = data.feature_names;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  out.labels.resize(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.features.row(static_cast<Eigen::Index>(k)) = data.features.row(static_cast<Eigen::Index>(rows[k]));
    out.labels[k] = data.labels[rows[k]];
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

/// Comma-separated table with a header row. No quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  }
};

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline CsvTable read_csv(std::istream& is, const std::string& source) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw parse_error(source + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header) throw parse_error(source + ": file is empty");
  if (t.rows.empty()) throw parse_error(source + ": no data rows");
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  return read_csv(in, path);
}

namespace detail {

inline int parse_label(const std::string& text, const std::string& source, std::size_t line) {
  double v = 0.0;
  if (!parse_double(text, v) || (v != 0.0 && v != 1.0)) {
    throw data_error(source + ": line " + std::to_string(line) + ": label '" + text +
                     "' is not 0 or 1");
  }
  return static_cast<int>(v);
}

inline double parse_cell(const std::string& text, const std::string& source, std::size_t line,
                         const std::string& column) {
  double v = 0.0;
  if (!parse_double(text, v) || !std::isfinite(v)) {
    throw parse_error(source + ": line " + std::to_string(line) + ": column '" + column +
                      "' value '" + text + "' is not a finite number");
  }
  return v;
}

}  // namespace detail

inline FeatureDataset feature_dataset_from(const CsvTable& t, const std::string& label_column,
                                           const std::string& source) {
  const auto label_idx = t.column(label_column);
  if (!label_idx) throw parse_error(source + ": no column named '" + label_column + "'");
  FeatureDataset d;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c != *label_idx) d.feature_names.push_back(t.header[c]);
  }
  d.features.resize(static_cast<Eigen::Index>(t.rows.size()),
                    static_cast<Eigen::Index>(d.feature_names.size()));
  d.labels.resize(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Eigen::Index col = 0;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c == *label_idx) {
        d.labels[r] = detail::parse_label(t.rows[r][c], source, t.line_numbers[r]);
      } else {
        d.features(static_cast<Eigen::Index>(r), col++) =
            detail::parse_cell(t.rows[r][c], source, t.line_numbers[r], t.header[c]);
      }
    }
  }
  return d;
}

/// Reads a feature CSV; every column except `label_column` is a feature.
inline FeatureDataset load_csv(const std::string& path, const std::string& label_column = "label") {
  return feature_dataset_from(read_csv_file(path), label_column, path);
}

struct ScoredTable {
  Dataset data;
  std::vector<double> extra;  // optional additional column, e.g. scaler outputs
};

/// Reads a `score,label` CSV, optionally with one more named numeric column.
inline ScoredTable scored_from(const CsvTable& t, const std::string& source,
                               const std::optional<std::string>& extra_column = std::nullopt) {
  const auto si = t.column("score");
  const auto li = t.column("label");
  if (!si || !li) throw parse_error(source + ": scored CSV needs 'score' and 'label' columns");
  std::optional<std::size_t> ei;
  if (extra_column) {
    ei = t.column(*extra_column);
    if (!ei) throw parse_error(source + ": no column named '" + *extra_column + "'");
  }
  std::vector<ScoredSample> samples(t.rows.size());
  ScoredTable out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto line = t.line_numbers[r];
    const double s = detail::parse_cell(t.rows[r][*si], source, line, "score");
    if (s < 0.0 || s > 1.0) {
      throw data_error(source + ": line " + std::to_string(line) + ": score outside [0, 1]");
    }
    samples[r] = {s, detail::parse_label(t.rows[r][*li], source, line)};
    if (ei) out.extra.push_back(detail::parse_cell(t.rows[r][*ei], source, line, *extra_column));
  }
  out.data = Dataset(std::move(samples));
  return out;
}

inline ScoredTable load_scored_csv(const std::string& path,
                                   const std::optional<std::string>& extra_column = std::nullopt) {
  return scored_from(read_csv_file(path), path, extra_column);
}

inline void write_scored_csv(std::ostream& os, const Dataset& data) {
  os << "score,label\n";
  for (const auto& s : data) os << exact(s.score) << ',' << s.label << '\n';
}

// ---------------------------------------------------------------------------
// Standardization

/// Per-column z-scoring with population standard deviation. Constant
/// columns are centred only and reported in `constant`.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;
  std::vector<bool> constant;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean).array().rowwise() / scale.array();
  }
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& z) const {
    return (z.array().rowwise() * scale.array()).matrix().rowwise() + mean;
  }
  bool any_constant() const {
    return std::find(constant.begin(), constant.end(), true) != constant.end();
  }
};

inline std::pair<FeatureDataset, Standardizer> standardize(const FeatureDataset& data) {
  const Eigen::Index n = data.features.rows();
  if (n < 2) throw data_error("standardization needs at least two rows");
  Standardizer st;
  st.mean = data.features.colwise().mean();
  const Eigen::MatrixXd centred = data.features.rowwise() - st.mean;
  st.scale = (centred.array().square().colwise().sum() / static_cast<double>(n)).sqrt().matrix();
  st.constant.assign(static_cast<std::size_t>(data.features.cols()), false);
  for (Eigen::Index c = 0; c < st.scale.size(); ++c) {
    if (!(st.scale(c) > 0.0)) {
      st.scale(c) = 1.0;
      st.constant[static_cast<std::size_t>(c)] = true;
    }
  }
  FeatureDataset out = data;
  out.features = st.apply(data.features);
  return {std::move(out), std::move(st)};
}

// ---------------------------------------------------------------------------
// Split / subsample protocol

/// Sizes for the train / scaler / calibration-pool split and the repeated
/// calibration + test subsamples drawn from the pool.
struct SplitPlan {
  std::size_t train = 0;
  std::size_t scaler = 0;
  std::size_t pool = 0;
  std::size_t n = 0;
  std::size_t n_test = 0;
  std::size_t repetitions = 1;
  std::uint64_t seed = 0;
};

struct Repetition {
  FeatureDataset calibration;
  FeatureDataset test;
};

/// Splits rows once from the master seed, then draws each repetition's
/// disjoint calibration and test subsets from the pool with a seed derived
/// from (master seed, repetition). Calibration sets for different n within
/// one repetition are nested prefixes of the same permutation.
class SplitStream {
 public:
  SplitStream(const FeatureDataset& data, SplitPlan plan) : data_(&data), plan_(plan) {
    if (plan.train + plan.scaler + plan.pool > data.size()) {
      throw config_error("split sizes exceed the number of rows");
    }
    if (plan.n + plan.n_test > plan.pool) {
      throw config_error("calibration plus test size exceeds the pool");
    }
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    SeededRng rng = SeededRng::derive(plan.seed, 0);
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    const auto a = idx.begin();
    const auto b = a + static_cast<std::ptrdiff_t>(plan.train);
    const auto c = b + static_cast<std::ptrdiff_t>(plan.scaler);
    train_.assign(a, b);
    scaler_.assign(b, c);
    pool_.assign(c, c + static_cast<std::ptrdiff_t>(plan.pool));
  }

  const SplitPlan& plan() const noexcept { return plan_; }
  std::size_t repetitions() const noexcept { return plan_.repetitions; }

  FeatureDataset train() const { return subset(*data_, train_); }
  FeatureDataset scaler_split() const { return subset(*data_, scaler_); }
  FeatureDataset pool() const { return subset(*data_, pool_); }

  /// Pool row positions (into `pool()`) for repetition r: calibration then test.
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> positions(
      std::size_t r, std::size_t n, std::size_t n_test) const {
    if (n + n_test > pool_.size()) throw config_error("calibration plus test size exceeds the pool");
    std::vector<std::size_t> perm(pool_.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    SeededRng rng = SeededRng::derive(plan_.seed, 1 + r);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    std::vector<std::size_t> cal(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n));
    // Test rows come from the far end so they stay disjoint from every n.
    std::vector<std::size_t> test(perm.end() - static_cast<std::ptrdiff_t>(n_test), perm.end());
    return {std::move(cal), std::move(test)};
  }

  Repetition repetition(std::size_t r) const { return repetition(r, plan_.n, plan_.n_test); }

  Repetition repetition(std::size_t r, std::size_t n, std::size_t n_test) const {
    auto [cal, test] = positions(r, n, n_test);
    for (auto& i : cal) i = pool_[i];
    for (auto& i : test) i = pool_[i];
    return {subset(*data_, cal), subset(*data_, test)};
  }

 private:
  const FeatureDataset* data_;
  SplitPlan plan_;
  std::vector<std::size_t> train_, scaler_, pool_;
};

inline SplitStream split_and_subsample(const FeatureDataset& data, const SplitPlan& plan) {
  return SplitStream(data, plan);
}

// ---------------------------------------------------------------------------
// Synthetic ground truth

enum class ScoreFamily { uniform, beta };
enum class RegressionFamily { identity, power, logistic_warp, piecewise_constant };

/// Score law plus true regression function eta(s) = E[Y | S = s].
struct SyntheticSpec {
  ScoreFamily score = ScoreFamily::uniform;
  double beta_a = 1.0;
  double beta_b = 1.0;

  RegressionFamily regression = RegressionFamily::identity;
  double power = 2.0;         // eta = s^power
  double warp_slope = 1.0;    // eta = sigmoid(slope * logit(s) + shift)
  double warp_shift = 0.0;
  std::vector<double> breaks;  // piecewise-constant: values[k] on [breaks[k-1], breaks[k])
  std::vector<double> values;

  std::uint64_t seed = 0;

  static SyntheticSpec constant(double c, std::uint64_t seed = 0) {
    SyntheticSpec s;
    s.regression = RegressionFamily::piecewise_constant;
    s.values = {c};
    s.seed = seed;
    return s;
  }

  double eta(double s) const {
    switch (regression) {
      case RegressionFamily::identity:
        return s;
      case RegressionFamily::power:
        return std::pow(s, power);
      case RegressionFamily::logistic_warp: {
        if (s <= 0.0) return warp_slope > 0.0 ? 0.0 : 1.0;
        if (s >= 1.0) return warp_slope > 0.0 ? 1.0 : 0.0;
        return sigmoid(warp_slope * std::log(s / (1.0 - s)) + warp_shift);
      }
      case RegressionFamily::piecewise_constant: {
        const auto k = std::upper_bound(breaks.begin(), breaks.end(), s) - breaks.begin();
        return values[static_cast<std::size_t>(k)];
      }
    }
    return 0.0;
  }

  /// Probability density of the score (normalized).
  double density(double s) const {
    if (s < 0.0 || s > 1.0) return 0.0;
    if (score == ScoreFamily::uniform) return 1.0;
    return boost::math::ibeta_derivative(beta_a, beta_b, s);
  }

  /// P(lo <= S < hi).
  double mass(double lo, double hi) const {
    lo = std::clamp(lo, 0.0, 1.0);
    hi = std::clamp(hi, 0.0, 1.0);
    if (hi <= lo) return 0.0;
    if (score == ScoreFamily::uniform) return hi - lo;
    return boost::math::ibeta(beta_a, beta_b, hi) - boost::math::ibeta(beta_a, beta_b, lo);
  }

  double draw_score(SeededRng& rng) const {
    if (score == ScoreFamily::uniform) return rng.uniform();
    const double x = rng.gamma(beta_a);
    const double y = rng.gamma(beta_b);
    return x / (x + y);
  }

  void validate() const {
    if (score == ScoreFamily::beta && !(beta_a > 0.0 && beta_b > 0.0)) {
      throw config_error("beta parameters must be positive");
    }
    if (regression == RegressionFamily::power && !(power > 0.0)) {
      throw config_error("power must be positive");
    }
    if (regression == RegressionFamily::piecewise_constant) {
      if (values.size() != breaks.size() + 1) {
        throw config_error("piecewise regression needs one more value than breaks");
      }
      if (!std::is_sorted(breaks.begin(), breaks.end())) throw config_error("breaks must increase");
      for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0)) throw config_error("piecewise values must lie in [0, 1]");
      }
    }
  }
};

/// Draws n scored samples from the spec using `rng`.
inline Dataset synthesize(const SyntheticSpec& spec, std::size_t n, SeededRng& rng) {
  spec.validate();
  if (n < 1) throw config_error("synthetic dataset needs n >= 1");
  std::vector<ScoredSample> samples(n);
  for (auto& s : samples) {
    s.score = spec.draw_score(rng);
    s.label = rng.bernoulli(spec.eta(s.score)) ? 1 : 0;
  }
  return Dataset(std::move(samples));
}

/// Draws n scored samples seeded by `spec.seed`.
inline Dataset synthesize(const SyntheticSpec& spec, std::size_t n) {
  SeededRng rng(spec.seed);
  return synthesize(spec, n, rng);
}

/// Feature rows for the scorer pipeline: the logit of a synthetic score
/// followed by `noise_columns` standard-normal distractors.
inline FeatureDataset synthesize_features(const SyntheticSpec& spec, std::size_t n,
                                          std::size_t noise_columns, SeededRng& rng) {
  const Dataset scored = synthesize(spec, n, rng);
  FeatureDataset out;
  out.feature_names.push_back("logit_score");
  for (std::size_t c = 0; c < noise_columns; ++c) out.feature_names.push_back("noise" + std::to_string(c));
  out.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(1 + noise_columns));
  out.labels = scored.labels();
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::clamp(scored[i].score, 1e-12, 1.0 - 1e-12);
    const auto r = static_cast<Eigen::Index>(i);
    out.features(r, 0) = std::log(s / (1.0 - s));
    for (std::size_t c = 0; c < noise_columns; ++c) {
      out.features(r, static_cast<Eigen::Index>(1 + c)) = rng.normal();
    }
  }
  return out;
}

namespace detail {

/// Integral of f over [lo, hi], split at eta's discontinuities.
template <class F>
double integrate_pieces(const SyntheticSpec& spec, F f, double lo, double hi) {
  std::vector<double> cuts{lo};
  if (spec.regression == RegressionFamily::piecewise_constant) {
    for (double b : spec.breaks) {
      if (b > lo && b < hi) cuts.push_back(b);
    }
  }
  cuts.push_back(hi);
  double total = 0.0;
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    if (cuts[k] <= cuts[k - 1]) continue;
    double err = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, cuts[k - 1], cuts[k], 20,
                                                                         1e-13, &err);
  }
  return total;
}

}  // namespace detail

/// E[Y | lo <= S < hi] under the spec, by adaptive Gauss-Kronrod quadrature.
inline double true_bin_mean(const SyntheticSpec& spec, double lo, double hi) {
  spec.validate();
  if (!(lo >= 0.0 && hi <= 1.0 && lo < hi)) throw config_error("interval must satisfy 0 <= lo < hi <= 1");
  const double m = spec.mass(lo, hi);
  if (!(m > 0.0)) throw config_error("interval has zero probability mass");
  const double num = detail::integrate_pieces(
      spec, [&](double s) { return spec.eta(s) * spec.density(s); }, lo, hi);
  return std::clamp(num / m, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Text specs: "uniform" | "beta:a,b" and
// "identity" | "power:k" | "logistic-warp:slope,shift" | "constant:c" |
// "piecewise:b1,b2,...;v1,v2,..."

namespace detail {

inline std::vector<double> number_list(std::string_view text, const std::string& what) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (const auto& f : split_fields(text)) out.push_back(to_double(f, what));
  return out;
}

}  // namespace detail

inline void parse_score_family(SyntheticSpec& spec, std::string_view text) {
  const auto colon = text.find(':');
  const auto name = trim(text.substr(0, colon));
  if (name == "uniform") {
    spec.score = ScoreFamily::uniform;
  } else if (name == "beta") {
    const auto p = detail::number_list(colon == text.npos ? "" : text.substr(colon + 1), "beta parameter");
    if (p.size() != 2) throw usage_error("beta scores need 'beta:a,b'");
    spec.score = ScoreFamily::beta;
    spec.beta_a = p[0];
    spec.beta_b = p[1];
  } else {
    throw usage_error("unknown score family '" + std::string(text) + "'");
  }
}

inline void parse_regression(SyntheticSpec& spec, std::string_view text) {
  const auto colon = text.find(':');
  const auto name = trim(text.substr(0, colon));
  const std::string_view args = colon == text.npos ? std::string_view{} : text.substr(colon + 1);
  if (name == "identity") {
    spec.regression = RegressionFamily::identity;
  } else if (name == "power") {
    const auto p = detail::number_list(args, "power");
    if (p.size() != 1) throw usage_error("power regression needs 'power:k'");
    spec.regression = RegressionFamily::power;
    spec.power = p[0];
  } else if (name == "logistic-warp") {
    const auto p = detail::number_list(args, "warp parameter");
    if (p.size() != 2) throw usage_error("logistic warp needs 'logistic-warp:slope,shift'");
    spec.regression = RegressionFamily::logistic_warp;
    spec.warp_slope = p[0];
    spec.warp_shift = p[1];
  } else if (name == "constant") {
    const auto p = detail::number_list(args, "constant");
    if (p.size() != 1) throw usage_error("constant regression needs 'constant:c'");
    spec.regression = RegressionFamily::piecewise_constant;
    spec.breaks.clear();
    spec.values = p;
  } else if (name == "piecewise") {
    const auto semi = args.find(';');
    if (semi == args.npos) throw usage_error("piecewise regression needs 'piecewise:breaks;values'");
    spec.regression = RegressionFamily::piecewise_constant;
    spec.breaks = detail::number_list(args.substr(0, semi), "break");
    spec.values = detail::number_list(args.substr(semi + 1), "piece value");
  } else {
    throw usage_error("unknown regression family '" + std::string(text) + "'");
  }
  spec.validate();
}

}  // namespace histcal
