#pragma once

#include <cmath>
#include <vector>

#include "demoscore/errors.hpp"

namespace demoscore {

// Two-sided 90% normal quantile used for all reported intervals.
inline constexpr double kZ90 = 1.6449;

// Success-rate estimate with a 90% interval. For binary outcomes the
// interval is a Wilson score interval; for fractional outcomes it is a
// normal approximation around the mean and `fractional` is set.
struct SuccessStats {
  int n = 0;
  double successes = 0.0;  // sum of outcomes
  double p_hat = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool fractional = false;
};

inline std::pair<double, double> wilson_interval(double successes, int n, double z = kZ90) {
  if (n <= 0) throw ContractError("wilson_interval needs n >= 1");
  const double nn = static_cast<double>(n);
  const double phat = successes / nn;
  const double z2n = z * z / nn;
  const double center = (phat + z2n / 2.0) / (1.0 + z2n);
  const double half =
      z * std::sqrt(phat * (1.0 - phat) / nn + z * z / (4.0 * nn * nn)) / (1.0 + z2n);
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

inline SuccessStats success_stats(const std::vector<double>& outcomes) {
  if (outcomes.empty()) throw ContractError("success_stats needs at least one outcome");
  SuccessStats s;
  s.n = static_cast<int>(outcomes.size());
  bool binary = true;
  for (double v : outcomes) {
    s.successes += v;
    if (v != 0.0 && v != 1.0) binary = false;
  }
  s.p_hat = s.successes / static_cast<double>(s.n);
  if (binary) {
    auto [lo, hi] = wilson_interval(s.successes, s.n);
    s.lo = lo;
    s.hi = hi;
  } else {
    s.fractional = true;
    double var = 0.0;
    for (double v : outcomes) var += (v - s.p_hat) * (v - s.p_hat);
    var /= static_cast<double>(s.n);
    const double half = kZ90 * std::sqrt(var / static_cast<double>(s.n));
    s.lo = std::max(0.0, s.p_hat - half);
    s.hi = std::min(1.0, s.p_hat + half);
  }
  return s;
}

// Pools binary counts across replicates into one interval.
inline SuccessStats pool_stats(const std::vector<SuccessStats>& parts) {
  if (parts.empty()) throw ContractError("pool_stats needs at least one part");
  SuccessStats s;
  for (const auto& p : parts) {
    s.n += p.n;
    s.successes += p.successes;
    s.fractional = s.fractional || p.fractional;
  }
  s.p_hat = s.successes / static_cast<double>(s.n);
  auto [lo, hi] = wilson_interval(s.successes, s.n);
  s.lo = lo;
  s.hi = hi;
  return s;
}

}  // namespace demoscore
