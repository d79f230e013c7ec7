#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "qlocal/types.hpp"

namespace qlocal {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
inline QuadratureRule gauss_legendre(int n) {
  QuadratureRule q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.nodes[i] = -x;
    q.nodes[n - 1 - i] = x;
    q.weights[i] = q.weights[n - 1 - i] = w;
  }
  return q;
}

/// Composite rule on [a, b] with `panels` equal panels of an n-point Gauss-Legendre rule.
inline QuadratureRule composite_gauss_legendre(double a, double b, int panels, int n = 16) {
  static const QuadratureRule base16 = gauss_legendre(16);
  const QuadratureRule base = n == 16 ? base16 : gauss_legendre(n);
  QuadratureRule q;
  q.nodes.reserve(static_cast<std::size_t>(panels) * n);
  q.weights.reserve(static_cast<std::size_t>(panels) * n);
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    double lo = a + p * h;
    for (int i = 0; i < n; ++i) {
      q.nodes.push_back(lo + 0.5 * h * (base.nodes[i] + 1.0));
      q.weights.push_back(0.5 * h * base.weights[i]);
    }
  }
  return q;
}

}  // namespace qlocal
