#pragma once

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "histcal/assessment.hpp"
#include "histcal/calibrators.hpp"
#include "histcal/data.hpp"
#include "histcal/errors.hpp"
#include "histcal/guarantees.hpp"
#include "histcal/scalers.hpp"
#include "histcal/stats.hpp"

namespace histcal {

/// Runs body(i) for i in [0, count) on up to `threads` workers. Results must
/// be written to per-index slots; the first exception is rethrown.
inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  std::mutex failure_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline unsigned default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Two-sided exact (Clopper-Pearson) interval for a binomial proportion.
struct ProportionInterval {
  double lower = 0.0;
  double upper = 1.0;
};

inline ProportionInterval clopper_pearson(std::size_t trials, std::size_t successes, double level) {
  if (trials == 0) return {};
  using boost::math::binomial_distribution;
  const double tail = (1.0 - level) / 2.0;
  const auto n = static_cast<double>(trials);
  const auto k = static_cast<double>(successes);
  return {binomial_distribution<>::find_lower_bound_on_p(n, k, tail),
          binomial_distribution<>::find_upper_bound_on_p(n, k, tail)};
}

/// Exact predictor law of a fitted model under a synthetic spec: bins with
/// equal biases are pooled, as E[Y | h(X) = r] conditions on the value.
inline DiscretePredictorDistribution oracle_distribution(const BinningModel& model,
                                                         const SyntheticSpec& spec) {
  std::map<double, std::pair<double, double>> by_value;  // r -> (mass, mass * mean)
  for (std::size_t b = 0; b < model.bins(); ++b) {
    const double lo = model.edges()[b];
    const double hi = model.edges()[b + 1];
    const double m = spec.mass(lo, hi);
    if (!(m > 0.0)) continue;
    auto& slot = by_value[model.biases()[b]];
    slot.first += m;
    slot.second += m * true_bin_mean(spec, lo, hi);
  }
  double total = 0.0;
  for (const auto& [r, mm] : by_value) total += mm.first;
  std::vector<DiscretePredictorDistribution::Atom> atoms;
  for (const auto& [r, mm] : by_value) {
    atoms.push_back({r, mm.first / total, std::clamp(mm.second / mm.first, 0.0, 1.0)});
  }
  return DiscretePredictorDistribution(std::move(atoms));
}

struct CoverageReport {
  Calibrator variant = Calibrator::umd;
  std::size_t n = 0;
  std::size_t bins = 0;
  double alpha = 0.0;
  double delta = 0.0;
  std::size_t trials = 0;

  double epsilon_conditional = 0.0;  // width the failure test uses
  double epsilon_marginal = 0.0;     // randomized-UMD marginal width (delta = 0 when not randomized)
  double ece_bound = 0.0;            // sqrt(B/2n) + delta

  std::vector<double> max_deviation;  // per trial, max_b |true mean - bias|
  std::vector<double> marginal_mass;  // per trial, mass of bins deviating by more than epsilon_marginal
  std::vector<double> ece_l1;         // per trial, exact l1-ECE
  std::vector<double> ece_l2;         // per trial, exact l2-ECE

  std::size_t failures = 0;
  double failure_rate = 0.0;
  ProportionInterval failure_interval;  // 99% Clopper-Pearson
  MeanStderr marginal_mass_summary;
  MeanStderr ece_l1_summary;
  MeanStderr ece_l2_summary;
};

inline double coverage_epsilon(Calibrator variant, std::size_t n, std::size_t bins, double alpha,
                               double delta) {
  switch (variant) {
    case Calibrator::umd: return eps_umd(n, bins, alpha);
    case Calibrator::umd_original: return eps_umd_original(n, bins, alpha);
    case Calibrator::umd_randomized:
      return eps_randomized(n, bins, alpha, delta, CalibrationMode::conditional);
    default:
      throw config_error("coverage is defined for umd, umd-original and umd-randomized only");
  }
}

/// Monte-Carlo check of the conditional-calibration guarantee.
///
/// Each trial draws n points, fits the variant and compares every bias with
/// the exact mean of its bin interval (quadrature under the spec, given the
/// fitted edges). A trial fails when the largest deviation exceeds the
/// variant's width. Trial k uses the stream derived from (seed, k), so the
/// report does not depend on `threads`.
inline CoverageReport run_coverage(const SyntheticSpec& spec, Calibrator variant, std::size_t n,
                                   std::size_t bins, double alpha, double delta, std::size_t trials,
                                   std::uint64_t seed, unsigned threads = 1) {
  spec.validate();
  CoverageReport rep;
  rep.variant = variant;
  rep.n = n;
  rep.bins = bins;
  rep.alpha = alpha;
  rep.delta = variant == Calibrator::umd_randomized ? delta : 0.0;
  rep.trials = trials;
  rep.epsilon_conditional = coverage_epsilon(variant, n, bins, alpha, rep.delta);
  rep.epsilon_marginal = eps_randomized(n, bins, alpha, rep.delta, CalibrationMode::marginal);
  rep.ece_bound = ece_expectation_bound(n, bins, rep.delta);

  rep.max_deviation.assign(trials, 0.0);
  rep.marginal_mass.assign(trials, 0.0);
  rep.ece_l1.assign(trials, 0.0);
  rep.ece_l2.assign(trials, 0.0);

  FitOptions opts;
  opts.bins = bins;
  opts.delta = delta;
  parallel_for(trials, threads, [&](std::size_t t) {
    SeededRng rng = SeededRng::derive(seed, t);
    const Dataset data = synthesize(spec, n, rng);
    const BinningModel model = fit(variant, data, opts, rng);
    double worst = 0.0;
    double off_mass = 0.0;
    for (std::size_t b = 0; b < model.bins(); ++b) {
      const double lo = model.edges()[b];
      const double hi = model.edges()[b + 1];
      const double m = spec.mass(lo, hi);
      if (!(m > 0.0)) continue;
      const double dev = std::abs(true_bin_mean(spec, lo, hi) - model.biases()[b]);
      worst = std::max(worst, dev);
      if (dev > rep.epsilon_marginal) off_mass += m;
    }
    const auto dist = oracle_distribution(model, spec);
    rep.max_deviation[t] = worst;
    rep.marginal_mass[t] = off_mass;
    rep.ece_l1[t] = ece_discrete(dist, 1.0);
    rep.ece_l2[t] = ece_discrete(dist, 2.0);
  });

  for (double d : rep.max_deviation) rep.failures += d > rep.epsilon_conditional ? 1 : 0;
  if (trials > 0) {
    rep.failure_rate = static_cast<double>(rep.failures) / static_cast<double>(trials);
    rep.failure_interval = clopper_pearson(trials, rep.failures, 0.99);
  }
  rep.marginal_mass_summary = mean_stderr(rep.marginal_mass);
  rep.ece_l1_summary = mean_stderr(rep.ece_l1);
  rep.ece_l2_summary = mean_stderr(rep.ece_l2);
  return rep;
}

// ---------------------------------------------------------------------------
// Method comparison

struct MethodSettings {
  MethodSettings() = default;
  explicit MethodSettings(Calibrator m) : method(m) {}

  Calibrator method = Calibrator::umd_randomized;
  std::optional<std::size_t> bins;  // overrides the global B
  double delta = 1e-10;
  double split_fraction = 0.5;
};

struct SyntheticSource {
  SyntheticSpec spec;
  std::size_t rows = 30000;
  std::size_t noise_columns = 2;
};

struct CsvSource {
  std::string path;
  std::string label_column = "label";
};

struct ComparisonConfig {
  std::variant<SyntheticSource, CsvSource> source = SyntheticSource{};
  std::size_t train = 10000;
  std::size_t scaler = 5000;
  std::size_t pool = 15000;
  std::vector<std::size_t> n_values{1000};
  std::size_t n_test = 5000;
  std::size_t repetitions = 100;
  std::uint64_t seed = 0;
  std::size_t bins = 10;
  double alpha = 0.1;
  std::size_t grid_points = 1001;
  std::vector<MethodSettings> methods;
  unsigned threads = 1;
};

struct MethodResult {
  Calibrator method = Calibrator::umd;
  std::size_t n = 0;
  std::size_t bins = 0;
  AggregatedCurve marginal;
  AggregatedCurve conditional;
  MeanStderr ece_l1;
  std::string error;  // non-empty when the method failed; other fields then unset
  // Guarantee overlay for randomized UMD: eps -> 1 - alpha(eps), obtained by
  // solving the marginal / conditional width for alpha.
  std::vector<double> theory_marginal;
  std::vector<double> theory_conditional;

  bool ok() const noexcept { return error.empty(); }
};

struct ComparisonReport {
  std::vector<double> grid;
  std::vector<MethodResult> results;
  bool scorer_converged = false;
  bool scaler_converged = false;
};

/// 1 - alpha(eps), where alpha solves the randomized-UMD width at (n, B, delta);
/// `log_factor` is 2 for the marginal width and 2B for the conditional one.
inline std::vector<double> theory_curve(const std::vector<double>& grid, std::size_t n, std::size_t bins,
                                        double delta, double log_factor) {
  const double m = detail::per_bin(n, bins);
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double t = grid[g] - delta;
    if (t <= 0.0) continue;
    const double alpha = log_factor * std::exp(-2.0 * m * t * t);
    out[g] = std::clamp(1.0 - alpha, 0.0, 1.0);
  }
  return out;
}

/// The scorer pipeline and repeated calibrate/assess loop: logistic scorer
/// on the train split, Platt scaler on the scaler split, then for every n
/// and repetition each method is fitted on a calibration subsample of the
/// pool and assessed on a disjoint test subsample.
inline ComparisonReport run_comparison(const ComparisonConfig& cfg) {
  if (cfg.methods.empty()) throw config_error("comparison needs at least one method");
  if (cfg.n_values.empty()) throw config_error("comparison needs at least one n");

  FeatureDataset raw;
  if (const auto* syn = std::get_if<SyntheticSource>(&cfg.source)) {
    SeededRng rng = SeededRng::derive(cfg.seed, 0xda7a);
    raw = synthesize_features(syn->spec, syn->rows, syn->noise_columns, rng);
  } else {
    const auto& csv = std::get<CsvSource>(cfg.source);
    raw = load_csv(csv.path, csv.label_column);
  }
  const auto [data, standardizer] = standardize(raw);

  const std::size_t n_max = *std::max_element(cfg.n_values.begin(), cfg.n_values.end());
  SplitPlan plan{cfg.train, cfg.scaler, cfg.pool, n_max, cfg.n_test, cfg.repetitions, cfg.seed};
  const SplitStream stream(data, plan);

  ComparisonReport report;
  report.grid = make_grid(cfg.grid_points);

  const FeatureDataset train = stream.train();
  const auto scorer = fit_logistic(train.features, train.labels);
  report.scorer_converged = scorer.converged;
  const FeatureDataset scaler_rows = stream.scaler_split();
  const auto raw_scores = scorer.model.apply_all(scaler_rows.features);
  const auto platt = fit_platt(raw_scores, scaler_rows.labels);
  report.scaler_converged = platt.converged;

  const FeatureDataset pool = stream.pool();
  const auto pool_scores = platt.model.apply_all(scorer.model.apply_all(pool.features));

  for (std::size_t n : cfg.n_values) {
    const std::size_t reps = cfg.repetitions;
    const std::size_t methods = cfg.methods.size();
    std::vector<std::vector<ValidityCurve>> marg(methods, std::vector<ValidityCurve>(reps));
    std::vector<std::vector<ValidityCurve>> cond(methods, std::vector<ValidityCurve>(reps));
    std::vector<std::vector<double>> ece(methods, std::vector<double>(reps));
    std::vector<std::vector<std::string>> errors(methods, std::vector<std::string>(reps));

    parallel_for(reps, cfg.threads, [&](std::size_t r) {
      const auto [cal_pos, test_pos] = stream.positions(r, n, cfg.n_test);
      std::vector<ScoredSample> cal, test;
      for (auto i : cal_pos) cal.push_back({pool_scores[i], pool.labels[i]});
      for (auto i : test_pos) test.push_back({pool_scores[i], pool.labels[i]});
      const Dataset cal_set(std::move(cal));
      const Dataset test_set(std::move(test));
      for (std::size_t m = 0; m < methods; ++m) {
        const auto& ms = cfg.methods[m];
        SeededRng rng = SeededRng::derive(cfg.seed ^ SeededRng::mix(n), r * 64 + m + 1);
        try {
          FitOptions opts;
          opts.bins = ms.bins.value_or(cfg.bins);
          opts.delta = ms.delta;
          opts.split_fraction = ms.split_fraction;
          const BinningModel model = fit(ms.method, cal_set, opts, rng);
          const auto preds = predict_all(model, test_set, &rng);
          const auto labels = test_set.labels();
          marg[m][r] = validity_marginal(preds, labels, report.grid);
          cond[m][r] = validity_conditional(preds, labels, report.grid);
          ece[m][r] = plugin_ece(preds, labels, 1.0);
        } catch (const Error& e) {
          errors[m][r] = e.what();
        }
      }
    });

    for (std::size_t m = 0; m < methods; ++m) {
      MethodResult res;
      res.method = cfg.methods[m].method;
      res.n = n;
      res.bins = cfg.methods[m].bins.value_or(cfg.bins);
      for (std::size_t r = 0; r < reps && res.error.empty(); ++r) {
        if (!errors[m][r].empty()) res.error = "repetition " + std::to_string(r) + ": " + errors[m][r];
      }
      if (res.ok()) {
        res.marginal = aggregate_curves(marg[m]);
        res.conditional = aggregate_curves(cond[m]);
        res.ece_l1 = mean_stderr(ece[m]);
        if (res.method == Calibrator::umd_randomized && n >= 2 * res.bins) {
          const double d = cfg.methods[m].delta;
          res.theory_marginal = theory_curve(report.grid, n, res.bins, d, 2.0);
          res.theory_conditional =
              theory_curve(report.grid, n, res.bins, d, 2.0 * static_cast<double>(res.bins));
        }
      }
      report.results.push_back(std::move(res));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Configuration file
//
//   [data]       source = synthetic | csv, path, label_column, rows, score, eta,
//                noise_features, spec_seed
//   [protocol]   train, scaler, pool, n (comma list), test, repetitions, seed
//   [binning]    B, alpha, grid
//   [method <name>]  delta, split_fraction, B
//
// Lines starting with '#' or ';' are comments.

inline ComparisonConfig parse_comparison_config(std::istream& is, const std::string& source = "config") {
  ComparisonConfig cfg;
  SyntheticSource syn;
  CsvSource csv;
  std::string kind = "synthetic";
  std::string section;
  MethodSettings* method = nullptr;
  std::string line;
  std::size_t line_no = 0;

  auto where = [&] { return source + ": line " + std::to_string(line_no) + ": "; };
  auto count = [&](const std::string& v) {
    const long long x = to_integer(v, where() + "count");
    if (x < 0) throw parse_error(where() + "count must be nonnegative");
    return static_cast<std::size_t>(x);
  };

  while (std::getline(is, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#' || t.front() == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw parse_error(where() + "unterminated section header");
      const auto name = std::string(trim(t.substr(1, t.size() - 2)));
      method = nullptr;
      if (name.rfind("method", 0) == 0) {
        const auto mname = std::string(trim(std::string_view(name).substr(6)));
        const auto c = parse_calibrator(mname);
        if (!c) throw parse_error(where() + "unknown method '" + mname + "'");
        cfg.methods.push_back(MethodSettings{*c});
        method = &cfg.methods.back();
        section = "method";
      } else if (name == "data" || name == "protocol" || name == "binning") {
        section = name;
      } else {
        throw parse_error(where() + "unknown section '" + name + "'");
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw parse_error(where() + "expected key = value");
    const std::string key(trim(t.substr(0, eq)));
    const std::string value(trim(t.substr(eq + 1)));

    if (section == "data") {
      if (key == "source") {
        if (value != "synthetic" && value != "csv") throw parse_error(where() + "source must be synthetic or csv");
        kind = value;
      } else if (key == "path") {
        csv.path = value;
      } else if (key == "label_column") {
        csv.label_column = value;
      } else if (key == "rows") {
        syn.rows = count(value);
      } else if (key == "score") {
        parse_score_family(syn.spec, value);
      } else if (key == "eta") {
        parse_regression(syn.spec, value);
      } else if (key == "noise_features") {
        syn.noise_columns = count(value);
      } else if (key == "spec_seed") {
        syn.spec.seed = count(value);
      } else {
        throw parse_error(where() + "unknown data key '" + key + "'");
      }
    } else if (section == "protocol") {
      if (key == "train") cfg.train = count(value);
      else if (key == "scaler") cfg.scaler = count(value);
      else if (key == "pool") cfg.pool = count(value);
      else if (key == "test") cfg.n_test = count(value);
      else if (key == "repetitions") cfg.repetitions = count(value);
      else if (key == "seed") cfg.seed = count(value);
      else if (key == "n") {
        cfg.n_values.clear();
        for (const auto& f : split_fields(value)) cfg.n_values.push_back(count(f));
      } else {
        throw parse_error(where() + "unknown protocol key '" + key + "'");
      }
    } else if (section == "binning") {
      if (key == "B") cfg.bins = count(value);
      else if (key == "alpha") cfg.alpha = to_double(value, where() + "alpha");
      else if (key == "grid") cfg.grid_points = count(value);
      else throw parse_error(where() + "unknown binning key '" + key + "'");
    } else if (section == "method" && method) {
      if (key == "delta") method->delta = to_double(value, where() + "delta");
      else if (key == "split_fraction") method->split_fraction = to_double(value, where() + "split_fraction");
      else if (key == "B") method->bins = count(value);
      else throw parse_error(where() + "unknown method key '" + key + "'");
    } else {
      throw parse_error(where() + "key outside of a section");
    }
  }
  if (kind == "csv") {
    if (csv.path.empty()) throw parse_error(source + ": csv source needs a path");
    cfg.source = csv;
  } else {
    cfg.source = syn;
  }
  return cfg;
}

}  // namespace histcal
