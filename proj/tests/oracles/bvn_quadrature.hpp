#pragma once

// Bivariate normal orthant probabilities by brute-force quadrature of the
// density. Independent of the library's normal routines.

#include <cmath>
#include <numbers>

namespace oracle {

inline double phi2(double x, double y, double rho) {
  const double om = 1.0 - rho * rho;
  return std::exp(-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * om)) / (2.0 * std::numbers::pi * std::sqrt(om));
}

// P(X <= h, Y <= k) by a tensor-product composite 4-point Gauss-Legendre
// rule over [lo, h] x [lo, k]. Valid for |rho| < 1.
inline double bvn_cdf_tensor(double h, double k, double rho, int panels = 240, double lo = -9.0) {
  static const double t[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
  static const double w[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
  if (h <= lo || k <= lo) return 0.0;
  const double hx = (h - lo) / panels;
  const double hy = (k - lo) / panels;
  double total = 0.0;
  for (int a = 0; a < panels; ++a)
    for (int i = 0; i < 4; ++i) {
      const double x = lo + hx * (a + 0.5 * (t[i] + 1.0));
      double inner = 0.0;
      for (int b = 0; b < panels; ++b)
        for (int j = 0; j < 4; ++j) {
          const double y = lo + hy * (b + 0.5 * (t[j] + 1.0));
          inner += w[j] * phi2(x, y, rho);
        }
      total += w[i] * inner;
    }
  return total * 0.25 * hx * hy;
}

inline double std_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Same probability as a one-dimensional integral of the conditional
// distribution, P = int_{-inf}^h phi(x) Phi((k - rho x) / sqrt(1 - rho^2)) dx,
// by composite Simpson. Used to cross-check the tensor rule.
inline double bvn_cdf_conditional(double h, double k, double rho, int n = 20000, double lo = -12.0) {
  if (rho == 1.0) return std_cdf(std::min(h, k));
  if (rho == -1.0) return std::max(0.0, std_cdf(h) + std_cdf(k) - 1.0);
  const double s = std::sqrt(1.0 - rho * rho);
  auto f = [&](double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi) * std_cdf((k - rho * x) / s);
  };
  if (h <= lo) return 0.0;
  const double dx = (h - lo) / n;
  double sum = f(lo) + f(h);
  for (int i = 1; i < n; ++i) sum += f(lo + i * dx) * (i % 2 ? 4.0 : 2.0);
  return sum * dx / 3.0;
}

// Orthant at the origin for zero means: 1/4 + asin(rho) / (2 pi).
inline double arcsine_orthant(double rho) { return 0.25 + std::asin(rho) / (2.0 * std::numbers::pi); }

}  // namespace oracle
