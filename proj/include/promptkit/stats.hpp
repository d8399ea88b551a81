#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "promptkit/errors.hpp"

namespace promptkit {

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw ValidationError("mean of empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Unbiased sample variance (n-1 denominator); 0 for a single observation.
inline double sample_variance(const std::vector<double>& xs) {
  if (xs.empty()) throw ValidationError("variance of empty sample");
  if (xs.size() == 1) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

inline double sample_stddev(const std::vector<double>& xs) {
  return std::sqrt(sample_variance(xs));
}

// Welch two-sample t statistic (a minus b), for samples of unequal size and
// variance. Degenerate case: both variances zero yields 0 for equal means and
// a signed infinity otherwise.
inline double welch_t(const std::vector<double>& a,
                      const std::vector<double>& b) {
  if (a.empty() || b.empty())
    throw ValidationError("welch_t requires non-empty samples");
  const double ma = mean(a);
  const double mb = mean(b);
  const double se2 = sample_variance(a) / static_cast<double>(a.size()) +
                     sample_variance(b) / static_cast<double>(b.size());
  if (se2 == 0.0) {
    if (ma == mb) return 0.0;
    return ma > mb ? std::numeric_limits<double>::infinity()
                   : -std::numeric_limits<double>::infinity();
  }
  return (ma - mb) / std::sqrt(se2);
}

// Pearson correlation coefficient. Throws when either series is constant,
// since r is undefined there.
inline double pearson_r(const std::vector<double>& x,
                        const std::vector<double>& y) {
  if (x.size() != y.size())
    throw ValidationError("pearson_r length mismatch");
  if (x.size() < 2)
    throw ValidationError("pearson_r requires at least 2 points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw ValidationError("pearson_r undefined for zero-variance series");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace promptkit
