#pragma once

// Shared oracles for the test suites. These stay independent of the library
// code paths they check: finite differences for gradients, direct CDF
// comparison for distributions, scalar reference loops for optimizers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pawflow/common.hpp"

namespace testsup {

// Central finite differences of a scalar function of a flat parameter
// vector. 64-bit, fixed step.
inline pawflow::Vec numeric_grad(const std::function<double(const pawflow::Vec&)>& f,
                                 const pawflow::Vec& at, double h = 1e-5) {
  pawflow::Vec g(at.size());
  pawflow::Vec p = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double fp = f(p);
    p[i] = orig - h;
    const double fm = f(p);
    p[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double max_rel_error(const pawflow::Vec& analytic, const pawflow::Vec& numeric) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

// Kolmogorov-Smirnov statistic of samples against a CDF.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double worst = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    worst = std::max(worst, std::abs(F - static_cast<double>(i) / n));
    worst = std::max(worst, std::abs(static_cast<double>(i + 1) / n - F));
  }
  return worst;
}

}  // namespace testsup
