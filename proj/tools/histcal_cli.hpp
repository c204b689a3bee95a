#pragma once

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "histcal/histcal.hpp"

namespace histcal::cli {

inline std::uint64_t default_seed() {
  if (const char* env = std::getenv("HISTCAL_SEED")) {
    try {
      return static_cast<std::uint64_t>(to_integer(env, "HISTCAL_SEED"));
    } catch (const Error&) {
      throw usage_error("HISTCAL_SEED must be an integer");
    }
  }
  return 0;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot write '" + path + "'");
  return f;
}

inline BinningModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open model '" + path + "'");
  return read_model(in);
}

struct FitArgs {
  std::string method, data, out;
  std::optional<std::string> scaled_column;
  std::size_t bins = 10;
  double delta = 1e-10;
  double split_fraction = 0.5;
};

inline void run_fit(const FitArgs& a, std::uint64_t seed, std::ostream& out) {
  const auto kind = parse_calibrator(a.method);
  if (!kind) throw usage_error("unknown method '" + a.method + "'");
  const auto table = load_scored_csv(a.data, a.scaled_column);
  FitOptions opts;
  opts.bins = a.bins;
  opts.delta = a.delta;
  opts.split_fraction = a.split_fraction;
  opts.scaled_scores = table.extra;
  SeededRng rng(seed);
  const BinningModel model = fit(*kind, table.data, opts, rng);
  auto f = open_out(a.out);
  write_model(f, model);

  out << "n=" << table.data.size() << '\n' << "B=" << model.bins() << '\n' << "bin_counts=";
  const auto counts = bin_counts(model, table.data);
  for (std::size_t b = 0; b < counts.size(); ++b) out << (b ? " " : "") << counts[b];
  out << '\n';
}

struct PredictArgs {
  std::string model, data, out;
};

inline void run_predict(const PredictArgs& a, std::uint64_t seed, std::ostream&) {
  const BinningModel model = load_model(a.model);
  const auto table = read_csv_file(a.data);
  const auto col = table.column("score");
  if (!col) throw parse_error(a.data + ": no 'score' column");
  SeededRng rng(seed);
  auto f = open_out(a.out);
  f << "score,prediction\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double s = to_double(table.rows[r][*col], a.data + ": line " + std::to_string(table.line_numbers[r]));
    f << exact(s) << ',' << exact(predict(model, s, rng)) << '\n';
  }
}

struct AssessArgs {
  std::string model, test, out;
  std::size_t grid = 1001;
  bool svg = false;
};

inline void run_assess(const AssessArgs& a, std::uint64_t seed, std::ostream& out) {
  const BinningModel model = load_model(a.model);
  const auto table = load_scored_csv(a.test);
  const auto grid = make_grid(a.grid);
  SeededRng rng(seed);
  const auto preds = predict_all(model, table.data, &rng);
  const auto labels = table.data.labels();
  const auto marg = validity_marginal(preds, labels, grid);
  const auto cond = validity_conditional(preds, labels, grid);
  {
    auto f = open_out(a.out + "_marginal.csv");
    write_curve_csv(f, single_run(marg));
  }
  {
    auto f = open_out(a.out + "_conditional.csv");
    write_curve_csv(f, single_run(cond));
  }
  {
    auto f = open_out(a.out + "_jumps.csv");
    write_jumps_csv(f, marg);
  }
  if (a.svg) {
    auto f = open_out(a.out + "_validity.svg");
    write_svg(f, "Validity plot", grid,
              {{"marginal", marg.values, {}}, {"conditional", cond.values, {}}});
  }
  out << "n_test=" << table.data.size() << '\n'
      << "l1_ece=" << brief(plugin_ece(preds, labels, 1.0)) << '\n'
      << "l2_ece=" << brief(plugin_ece(preds, labels, 2.0)) << '\n'
      << "marginal_auc=" << brief(curve_auc(marg)) << '\n';
}

struct BoundArgs {
  std::string variant;
  std::optional<std::size_t> n;
  std::size_t bins = 10;
  double alpha = 0.1;
  std::optional<double> delta;
  std::optional<double> epsilon;
  double c = 100.0;
};

inline void run_bound(const BoundArgs& a, std::ostream& out) {
  if (a.variant == "ums-appendix") {
    if (!a.epsilon) throw usage_error("ums-appendix needs --epsilon");
    const auto r = ums_required_n(*a.epsilon, a.alpha, a.bins, a.c);
    out << "variant=ums-appendix\n"
        << "epsilon=" << brief(*a.epsilon) << '\n'
        << "alpha=" << brief(a.alpha) << '\n'
        << "B=" << a.bins << '\n'
        << "c=" << brief(a.c) << '\n'
        << "n_min=" << r.n_min << '\n'
        << "n_split1=" << r.n_split1 << '\n'
        << "n_split2=" << r.n_split2 << '\n'
        << "n_total=" << r.n_total << '\n';
    return;
  }
  const auto v = parse_guarantee_variant(a.variant);
  if (!v) throw usage_error("unknown variant '" + a.variant + "'");
  const bool randomized = *v == GuaranteeVariant::randomized_marginal ||
                          *v == GuaranteeVariant::randomized_conditional ||
                          *v == GuaranteeVariant::ece_expectation;
  const double delta = randomized ? a.delta.value_or(1e-10) : 0.0;

  if (a.epsilon && !a.n) {
    const std::size_t n = required_n(*a.epsilon, a.alpha, a.bins, *v, delta);
    out << "variant=" << to_string(*v) << '\n'
        << "epsilon=" << brief(*a.epsilon) << '\n'
        << "alpha=" << brief(a.alpha) << '\n'
        << "B=" << a.bins << '\n'
        << "delta=" << brief(delta) << '\n'
        << "required_n=" << n << '\n';
    return;
  }
  if (!a.n) throw usage_error("bound needs --n (or --epsilon to solve for n)");
  const auto r = evaluate_guarantee(*v, *a.n, a.bins, a.alpha, delta);
  out << "variant=" << to_string(r.variant) << '\n'
      << "n=" << r.n << '\n'
      << "B=" << r.bins << '\n'
      << "alpha=" << brief(r.alpha) << '\n'
      << "delta=" << brief(r.delta) << '\n'
      << "epsilon=" << brief(r.epsilon) << '\n';
}

struct PlanArgs {
  std::size_t n = 0;
  double alpha = 0.1;
  std::size_t b_min = 1;
  std::size_t b_max = 50;
  std::optional<std::string> out;
};

inline void run_plan(const PlanArgs& a, std::ostream& out) {
  const auto curve = bound_curve(a.n, a.alpha, a.b_min, a.b_max);
  std::ostringstream csv;
  csv << "B,epsilon\n";
  for (const auto& p : curve.points) csv << p.bins << ',' << exact(p.epsilon) << '\n';
  if (a.out) {
    auto f = open_out(*a.out);
    f << csv.str();
  } else {
    out << csv.str();
  }
}

struct CoverageArgs {
  std::string score = "uniform";
  std::string eta = "identity";
  std::string method = "umd";
  std::size_t n = 2900;
  std::size_t bins = 10;
  double alpha = 0.1;
  double delta = 1e-10;
  std::size_t trials = 500;
  std::optional<std::string> out;
};

inline void run_coverage_cmd(const CoverageArgs& a, std::uint64_t seed, unsigned threads,
                             std::ostream& out) {
  SyntheticSpec spec;
  parse_score_family(spec, a.score);
  parse_regression(spec, a.eta);
  const auto kind = parse_calibrator(a.method);
  if (!kind) throw usage_error("unknown method '" + a.method + "'");
  const auto r = run_coverage(spec, *kind, a.n, a.bins, a.alpha, a.delta, a.trials, seed, threads);
  out << "method=" << to_string(r.variant) << '\n'
      << "n=" << r.n << '\n'
      << "B=" << r.bins << '\n'
      << "alpha=" << brief(r.alpha) << '\n'
      << "delta=" << brief(r.delta) << '\n'
      << "trials=" << r.trials << '\n'
      << "epsilon=" << brief(r.epsilon_conditional) << '\n'
      << "failures=" << r.failures << '\n'
      << "failure_rate=" << brief(r.failure_rate) << '\n'
      << "failure_rate_cp99=" << brief(r.failure_interval.lower) << ',' << brief(r.failure_interval.upper) << '\n'
      << "epsilon_marginal=" << brief(r.epsilon_marginal) << '\n'
      << "marginal_failure_mass=" << brief(r.marginal_mass_summary.mean) << '\n'
      << "mean_l2_ece=" << brief(r.ece_l2_summary.mean) << '\n'
      << "ece_bound=" << brief(r.ece_bound) << '\n';
  if (a.out) {
    auto f = open_out(*a.out);
    f << "trial,max_deviation,marginal_mass,l1_ece,l2_ece\n";
    for (std::size_t t = 0; t < r.trials; ++t) {
      f << t << ',' << exact(r.max_deviation[t]) << ',' << exact(r.marginal_mass[t]) << ','
        << exact(r.ece_l1[t]) << ',' << exact(r.ece_l2[t]) << '\n';
    }
  }
}

struct CompareArgs {
  std::string config, out;
  bool svg = false;
};

inline void write_comparison(const ComparisonReport& rep, const std::string& prefix, bool svg) {
  {
    auto f = open_out(prefix + "_summary.csv");
    f << "method,n,B,runs,l1_ece_mean,l1_ece_stderr,status\n";
    for (const auto& r : rep.results) {
      f << to_string(r.method) << ',' << r.n << ',' << r.bins << ',' << r.marginal.runs << ','
        << (r.ok() ? exact(r.ece_l1.mean) : "") << ',' << (r.ok() ? exact(r.ece_l1.stderr_) : "") << ','
        << (r.ok() ? "ok" : "failed: " + r.error) << '\n';
    }
  }
  std::vector<std::size_t> ns;
  for (const auto& r : rep.results) {
    if (std::find(ns.begin(), ns.end(), r.n) == ns.end()) ns.push_back(r.n);
  }
  for (const auto& r : rep.results) {
    if (!r.ok()) continue;
    const std::string stem = prefix + "_" + std::string(to_string(r.method)) + "_n" + std::to_string(r.n);
    auto fm = open_out(stem + "_marginal.csv");
    write_curve_csv(fm, r.marginal);
    auto fc = open_out(stem + "_conditional.csv");
    write_curve_csv(fc, r.conditional);
    if (!r.theory_marginal.empty()) {
      auto ft = open_out(stem + "_theory.csv");
      ft << "epsilon,marginal,conditional\n";
      for (std::size_t g = 0; g < rep.grid.size(); ++g) {
        ft << exact(rep.grid[g]) << ',' << exact(r.theory_marginal[g]) << ','
           << exact(r.theory_conditional[g]) << '\n';
      }
    }
  }
  if (!svg) return;
  for (std::size_t n : ns) {
    for (const bool marginal : {true, false}) {
      std::vector<SvgSeries> series;
      for (const auto& r : rep.results) {
        if (r.n != n || !r.ok()) continue;
        const auto& c = marginal ? r.marginal : r.conditional;
        series.push_back({std::string(to_string(r.method)), c.mean, c.stderr_});
        if (!r.theory_conditional.empty()) {
          series.push_back({"guarantee", marginal ? r.theory_marginal : r.theory_conditional, {}});
        }
      }
      const std::string kind = marginal ? "marginal" : "conditional";
      auto f = open_out(prefix + "_n" + std::to_string(n) + "_" + kind + ".svg");
      write_svg(f, kind + " validity, n = " + std::to_string(n), rep.grid, series, 0.2);
    }
  }
}

inline void run_compare(const CompareArgs& a, std::optional<std::uint64_t> seed, unsigned threads,
                        std::ostream& out) {
  std::ifstream in(a.config);
  if (!in) throw io_error("cannot open config '" + a.config + "'");
  auto cfg = parse_comparison_config(in, a.config);
  if (seed) cfg.seed = *seed;
  cfg.threads = threads;
  const auto rep = run_comparison(cfg);
  write_comparison(rep, a.out, a.svg);
  for (const auto& r : rep.results) {
    out << to_string(r.method) << " n=" << r.n;
    if (r.ok()) {
      out << " l1_ece=" << brief(r.ece_l1.mean) << " +- " << brief(r.ece_l1.stderr_) << '\n';
    } else {
      out << " failed: " << r.error << '\n';
    }
  }
}

/// Entry point; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Histogram-binning calibration toolkit"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  unsigned threads = default_threads();

  FitArgs fit_a;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a binning calibrator on a score,label CSV");
  fit_cmd->add_option("--method", fit_a.method,
                      "umd | umd-original | umd-randomized | ums | fixed-width | isotonic | scaling-binning")
      ->required();
  fit_cmd->add_option("--data", fit_a.data, "CSV with score,label columns")->required();
  fit_cmd->add_option("--B", fit_a.bins, "number of bins");
  fit_cmd->add_option("--delta", fit_a.delta, "randomization parameter for umd-randomized");
  fit_cmd->add_option("--split-fraction", fit_a.split_fraction, "first-split fraction for ums");
  fit_cmd->add_option("--scaled-column", fit_a.scaled_column, "column averaged by scaling-binning");
  fit_cmd->add_option("--out", fit_a.out, "model output path")->required();
  fit_cmd->add_option("--seed", seed);

  PredictArgs pred_a;
  auto* pred_cmd = app.add_subcommand("predict", "Apply a fitted model to a CSV of scores");
  pred_cmd->add_option("--model", pred_a.model)->required();
  pred_cmd->add_option("--data", pred_a.data)->required();
  pred_cmd->add_option("--out", pred_a.out)->required();
  pred_cmd->add_option("--seed", seed);

  AssessArgs assess_a;
  auto* assess_cmd = app.add_subcommand("assess", "Validity curves and plugin ECE on a test CSV");
  assess_cmd->add_option("--model", assess_a.model)->required();
  assess_cmd->add_option("--test", assess_a.test)->required();
  assess_cmd->add_option("--grid", assess_a.grid, "number of epsilon grid points");
  assess_cmd->add_option("--out", assess_a.out, "output prefix")->required();
  assess_cmd->add_flag("--svg", assess_a.svg);
  assess_cmd->add_option("--seed", seed);

  BoundArgs bound_a;
  auto* bound_cmd = app.add_subcommand("bound", "Evaluate or invert a calibration guarantee");
  bound_cmd->add_option("--variant", bound_a.variant,
                        "umd | umd-original | randomized-marginal | randomized-conditional | "
                        "ece-expectation | ums-appendix")
      ->required();
  bound_cmd->add_option("--n", bound_a.n);
  bound_cmd->add_option("--B", bound_a.bins);
  bound_cmd->add_option("--alpha", bound_a.alpha);
  bound_cmd->add_option("--delta", bound_a.delta);
  bound_cmd->add_option("--epsilon", bound_a.epsilon);
  bound_cmd->add_option("--c", bound_a.c, "quantile-step constant for ums-appendix");

  PlanArgs plan_a;
  auto* plan_cmd = app.add_subcommand("plan", "Guarantee width as a function of B (CSV B,epsilon)");
  plan_cmd->add_option("--n", plan_a.n)->required();
  plan_cmd->add_option("--alpha", plan_a.alpha);
  plan_cmd->add_option("--B-min", plan_a.b_min);
  plan_cmd->add_option("--B-max", plan_a.b_max);
  plan_cmd->add_option("--out", plan_a.out);

  CoverageArgs cov_a;
  auto* cov_cmd = app.add_subcommand("coverage", "Monte-Carlo coverage check on synthetic data");
  cov_cmd->add_option("--score", cov_a.score, "uniform | beta:a,b");
  cov_cmd->add_option("--eta", cov_a.eta,
                      "identity | power:k | logistic-warp:slope,shift | constant:c | piecewise:breaks;values");
  cov_cmd->add_option("--method", cov_a.method, "umd | umd-original | umd-randomized");
  cov_cmd->add_option("--n", cov_a.n);
  cov_cmd->add_option("--B", cov_a.bins);
  cov_cmd->add_option("--alpha", cov_a.alpha);
  cov_cmd->add_option("--delta", cov_a.delta);
  cov_cmd->add_option("--trials", cov_a.trials);
  cov_cmd->add_option("--out", cov_a.out, "per-trial CSV");
  cov_cmd->add_option("--seed", seed);
  cov_cmd->add_option("--threads", threads);

  CompareArgs cmp_a;
  auto* cmp_cmd = app.add_subcommand("compare", "Run the method-comparison protocol from a config file");
  cmp_cmd->add_option("--config", cmp_a.config)->required();
  cmp_cmd->add_option("--out", cmp_a.out, "output prefix")->required();
  cmp_cmd->add_flag("--svg", cmp_a.svg);
  cmp_cmd->add_option("--seed", seed);
  cmp_cmd->add_option("--threads", threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (threads == 0) throw usage_error("--threads must be positive");
    const std::uint64_t s = seed.value_or(default_seed());
    if (*fit_cmd) run_fit(fit_a, s, out);
    else if (*pred_cmd) run_predict(pred_a, s, out);
    else if (*assess_cmd) run_assess(assess_a, s, out);
    else if (*bound_cmd) run_bound(bound_a, out);
    else if (*plan_cmd) run_plan(plan_a, out);
    else if (*cov_cmd) run_coverage_cmd(cov_a, s, threads, out);
    else if (*cmp_cmd) run_compare(cmp_a, seed, threads, out);
  } catch (const Error& e) {
    err << e.what() << '\n';
    return exit_code(e.kind());
  }
  return 0;
}

}  // namespace histcal::cli
