#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "histcal/errors.hpp"

namespace histcal {

// All logarithms below are natural logarithms.

enum class GuaranteeVariant {
  umd_conditional,
  umd_original_conditional,
  randomized_marginal,
  randomized_conditional,
  ece_expectation,
};

inline std::string_view to_string(GuaranteeVariant v) {
  switch (v) {
    case GuaranteeVariant::umd_conditional: return "umd";
    case GuaranteeVariant::umd_original_conditional: return "umd-original";
    case GuaranteeVariant::randomized_marginal: return "randomized-marginal";
    case GuaranteeVariant::randomized_conditional: return "randomized-conditional";
    case GuaranteeVariant::ece_expectation: return "ece-expectation";
  }
  return "?";
}

inline std::optional<GuaranteeVariant> parse_guarantee_variant(std::string_view name) {
  for (auto v : {GuaranteeVariant::umd_conditional, GuaranteeVariant::umd_original_conditional,
                 GuaranteeVariant::randomized_marginal, GuaranteeVariant::randomized_conditional,
                 GuaranteeVariant::ece_expectation}) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

struct GuaranteeResult {
  double epsilon = 0.0;
  std::size_t n = 0;
  std::size_t bins = 0;
  double alpha = 0.0;
  double delta = 0.0;
  GuaranteeVariant variant = GuaranteeVariant::umd_conditional;
};

namespace detail {

inline void check_bound_inputs(std::size_t n, std::size_t bins, double alpha) {
  if (bins < 1) throw config_error("B must be at least 1");
  if (n < 2 * bins) {
    throw config_error("bound requires n >= 2B (n = " + std::to_string(n) + ", B = " +
                       std::to_string(bins) + ")");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("alpha must lie in (0, 1)");
}

inline void check_delta_nonneg(double delta) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw config_error("delta must be nonnegative");
}

/// floor(n/B) - 1, the guaranteed per-bin sample count.
inline double per_bin(std::size_t n, std::size_t bins) {
  return static_cast<double>(n / bins) - 1.0;
}

}  // namespace detail

/// Conditional-calibration width of UMD: sqrt(log(2B/alpha) / (2(floor(n/B) - 1))).
inline double eps_umd(std::size_t n, std::size_t bins, double alpha) {
  detail::check_bound_inputs(n, bins, alpha);
  return std::sqrt(std::log(2.0 * static_cast<double>(bins) / alpha) /
                   (2.0 * detail::per_bin(n, bins)));
}

/// Width for the original variant: eps_umd + 1/floor(n/B).
inline double eps_umd_original(std::size_t n, std::size_t bins, double alpha) {
  return eps_umd(n, bins, alpha) + 1.0 / static_cast<double>(n / bins);
}

enum class CalibrationMode { marginal, conditional };

/// Randomized UMD widths: log(2/alpha) for marginal, log(2B/alpha) for
/// conditional, each plus delta.
inline double eps_randomized(std::size_t n, std::size_t bins, double alpha, double delta,
                             CalibrationMode mode) {
  detail::check_bound_inputs(n, bins, alpha);
  detail::check_delta_nonneg(delta);
  const double numer = mode == CalibrationMode::marginal
                           ? std::log(2.0 / alpha)
                           : std::log(2.0 * static_cast<double>(bins) / alpha);
  return std::sqrt(numer / (2.0 * detail::per_bin(n, bins))) + delta;
}

/// Bound on the expected lp-ECE (p in [1,2]) of randomized UMD: sqrt(B/2n) + delta.
inline double ece_expectation_bound(std::size_t n, std::size_t bins, double delta) {
  if (bins < 1) throw config_error("B must be at least 1");
  if (n < 2 * bins) throw config_error("bound requires n >= 2B");
  detail::check_delta_nonneg(delta);
  return std::sqrt(static_cast<double>(bins) / (2.0 * static_cast<double>(n))) + delta;
}

/// Hoeffding half-width for a mean of m bounded samples at failure level t.
inline double hoeffding_halfwidth(std::size_t m, double t) {
  if (m < 1) throw config_error("Hoeffding half-width needs m >= 1");
  if (!(t > 0.0 && t < 1.0)) throw config_error("failure probability must lie in (0, 1)");
  return std::sqrt(std::log(2.0 / t) / (2.0 * static_cast<double>(m)));
}

/// Evaluates `variant` at (n, B, alpha, delta).
inline double guarantee_epsilon(GuaranteeVariant variant, std::size_t n, std::size_t bins,
                                double alpha, double delta) {
  switch (variant) {
    case GuaranteeVariant::umd_conditional: return eps_umd(n, bins, alpha);
    case GuaranteeVariant::umd_original_conditional: return eps_umd_original(n, bins, alpha);
    case GuaranteeVariant::randomized_marginal:
      return eps_randomized(n, bins, alpha, delta, CalibrationMode::marginal);
    case GuaranteeVariant::randomized_conditional:
      return eps_randomized(n, bins, alpha, delta, CalibrationMode::conditional);
    case GuaranteeVariant::ece_expectation: return ece_expectation_bound(n, bins, delta);
  }
  throw config_error("unknown guarantee variant");
}

inline GuaranteeResult evaluate_guarantee(GuaranteeVariant variant, std::size_t n, std::size_t bins,
                                          double alpha, double delta = 0.0) {
  return {guarantee_epsilon(variant, n, bins, alpha, delta), n, bins, alpha, delta, variant};
}

/// Smallest n >= 2B whose width is at most `epsilon`.
///
/// Widths are nonincreasing in n (floor(n/B) only steps up), so bisection
/// over an exponentially grown bracket finds the first feasible n exactly.
inline std::size_t required_n(double epsilon, double alpha, std::size_t bins,
                              GuaranteeVariant variant, double delta = 0.0) {
  if (bins < 1) throw config_error("B must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("alpha must lie in (0, 1)");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw config_error("epsilon must be positive");
  detail::check_delta_nonneg(delta);
  const bool has_delta = variant == GuaranteeVariant::randomized_marginal ||
                         variant == GuaranteeVariant::randomized_conditional ||
                         variant == GuaranteeVariant::ece_expectation;
  if (has_delta && epsilon <= delta) {
    throw config_error("epsilon must exceed the randomization term delta");
  }
  const double d = has_delta ? delta : 0.0;
  auto ok = [&](std::size_t n) { return guarantee_epsilon(variant, n, bins, alpha, d) <= epsilon; };

  std::size_t lo = 2 * bins;
  if (ok(lo)) return lo;
  std::size_t hi = lo;
  constexpr std::size_t kLimit = std::size_t{1} << 52;
  while (!ok(hi)) {
    lo = hi;
    if (hi > kLimit / 2) throw config_error("epsilon is too small to be reached");
    hi *= 2;
  }
  // Invariant: !ok(lo), ok(hi).
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

struct BoundCurve {
  struct Point {
    std::size_t bins;
    double epsilon;
  };
  std::vector<Point> points;
  std::vector<std::size_t> skipped;  // B values with n < 2B
};

/// eps_umd(n, B, alpha) across a range of B, for choosing a bin count.
inline BoundCurve bound_curve(std::size_t n, double alpha, std::size_t b_min, std::size_t b_max) {
  if (b_min < 1 || b_max < b_min) throw config_error("invalid B range");
  BoundCurve c;
  for (std::size_t b = b_min; b <= b_max; ++b) {
    if (n < 2 * b) {
      c.skipped.push_back(b);
      continue;
    }
    c.points.push_back({b, eps_umd(n, b, alpha)});
  }
  return c;
}

struct UmsSampleComplexity {
  std::size_t n_total = 0;
  std::size_t n_split1 = 0;
  std::size_t n_split2 = 0;
  std::size_t n_min = 0;  // required points in the smallest bin
};

/// Sample complexity of split-sample uniform-mass binning for
/// (epsilon, alpha)-marginal calibration with B bins.
///
/// Failure budget: alpha/2 to the per-bin Hoeffding intervals, alpha/4 to
/// the quantile step on split 1 (needs c B log(10B/(alpha/4)) points) and
/// alpha/4 to the bin-count lower bound on split 2. Each stage rounds up.
inline UmsSampleComplexity ums_required_n(double epsilon, double alpha, std::size_t bins,
                                          double c = 100.0) {
  if (bins < 1) throw config_error("B must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("alpha must lie in (0, 1)");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw config_error("epsilon must lie in (0, 1)");
  if (!(c > 0.0) || !std::isfinite(c)) throw config_error("constant c must be positive");
  const double b = static_cast<double>(bins);

  UmsSampleComplexity out;
  out.n_min = static_cast<std::size_t>(
      std::ceil(std::log(2.0 * b / (alpha / 2.0)) / (2.0 * epsilon * epsilon)));
  out.n_split1 = static_cast<std::size_t>(std::ceil(c * b * std::log(10.0 * b / (alpha / 4.0))));

  // n'/(2B) - sqrt(n' log(2B/(alpha/4)) / 2) >= N_min is a quadratic in sqrt(n').
  const double k = std::sqrt(std::log(2.0 * b / (alpha / 4.0)) / 2.0);
  const double target = static_cast<double>(out.n_min);
  auto ok = [&](double m) { return m / (2.0 * b) - k * std::sqrt(m) >= target; };
  const double root = b * (k + std::sqrt(k * k + 2.0 * target / b));  // sqrt(n') at equality
  auto n2 = static_cast<std::size_t>(std::floor(root * root));
  while (n2 > 0 && ok(static_cast<double>(n2 - 1))) --n2;
  while (!ok(static_cast<double>(n2))) ++n2;
  out.n_split2 = n2;
  out.n_total = out.n_split1 + out.n_split2;
  return out;
}

}  // namespace histcal
