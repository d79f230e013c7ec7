#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "qlocal/types.hpp"

namespace qlocal {

inline constexpr double kNoiseFloor = 1e-12;

struct DecayFit {
  double mu_hat = 0.0;  ///< -slope of log(error) against l, clipped at 0
  double C_hat = 0.0;   ///< exp(intercept)
  double r2 = 0.0;
  double slope = 0.0;   ///< unclipped
  int used = 0;
  int below_floor = 0;
};

/// Least squares of log(error) against l on the points above `floor`.
inline DecayFit fit_decay(const std::vector<std::pair<double, double>>& points, double floor = kNoiseFloor) {
  std::vector<double> xs, ys;
  DecayFit f;
  for (auto [l, e] : points) {
    if (e > floor && std::isfinite(e)) {
      xs.push_back(l);
      ys.push_back(std::log(e));
    } else {
      ++f.below_floor;
    }
  }
  f.used = static_cast<int>(xs.size());
  if (f.used < 3) throw InsufficientData("decay fit needs at least 3 points above the noise floor (have " +
                                         std::to_string(f.used) + ")");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0) throw InsufficientData("decay fit needs at least two distinct abscissae");
  f.slope = sxy / sxx;
  const double intercept = my - f.slope * mx;
  f.mu_hat = std::max(0.0, -f.slope);
  f.C_hat = std::exp(intercept);
  if (syy <= 0.0) {
    f.r2 = 1.0;
  } else {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double r = ys[i] - (intercept + f.slope * xs[i]);
      ss_res += r * r;
    }
    f.r2 = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return f;
}

}  // namespace qlocal
