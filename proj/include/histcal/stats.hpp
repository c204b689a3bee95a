#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace histcal {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t runs = 0;
};

/// Mean and standard error of the mean (sample std with divisor runs-1,
/// over sqrt(runs)). A single run has zero standard error.
inline MeanStderr mean_stderr(std::span<const double> values) {
  MeanStderr out;
  out.runs = values.size();
  if (values.empty()) return out;
  CompensatedSum s;
  for (double v : values) s.add(v);
  out.mean = s.value() / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  CompensatedSum sq;
  for (double v : values) sq.add((v - out.mean) * (v - out.mean));
  const double var = sq.value() / static_cast<double>(values.size() - 1);
  out.stderr_ = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

}  // namespace histcal
