#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "corrbath/common.hpp"

namespace corrbath::quadrature {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule of order n on [-1, 1] (Newton on P_n, Tricomi start).
inline Rule gauss_legendre(int n) {
  detail::require(n >= 1, "gauss_legendre: order must be >= 1");
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1);
    const double w = 2.0 / ((1 - x * x) * dp * dp);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

/// Composite Gauss-Legendre grid on [lo, hi] with equal panels, nodes increasing.
inline Rule composite(double lo, double hi, int panels, int order) {
  detail::require(hi > lo, "composite: empty interval");
  detail::require(panels >= 1 && order >= 1, "composite: bad panel layout");
  const Rule base = gauss_legendre(order);
  Rule r;
  r.nodes.reserve(static_cast<std::size_t>(panels) * order);
  r.weights.reserve(r.nodes.capacity());
  const double h = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * h;
    for (int i = 0; i < order; ++i) {
      r.nodes.push_back(a + 0.5 * h * (base.nodes[i] + 1.0));
      r.weights.push_back(0.5 * h * base.weights[i]);
    }
  }
  return r;
}

} // namespace corrbath::quadrature
