#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "akrel/bernoulli.hpp"
#include "akrel/error.hpp"
#include "akrel/kriging.hpp"
#include "akrel/normal.hpp"

namespace akrel {

enum class ClassificationMode { deterministic, probabilistic };
/// Estimator variance under independent (mi) or correlated (mc) indicators.
enum class CorrelationMode { mi, mc };

struct EstimatorStats {
  double pf_hat = 0.0;
  double variance = 0.0;
  double cov_estimator = std::numeric_limits<double>::infinity();
  double cov_mcs = std::numeric_limits<double>::infinity();
  bool cov_mcs_warning = false;
  ClassificationMode mode = ClassificationMode::probabilistic;
  CorrelationMode correlation_mode = CorrelationMode::mi;
};

namespace detail {
inline void require_nonempty(const std::vector<MarginalPrediction>& p, const char* what) {
  if (p.empty()) throw InvalidArgument(std::string(what) + ": empty prediction set");
}
}  // namespace detail

/// Fraction of the pool classified as failed by the sign of the mean.
inline double pf_deterministic(const std::vector<MarginalPrediction>& preds) {
  detail::require_nonempty(preds, "pf_deterministic");
  std::size_t k = 0;
  for (const auto& p : preds) k += p.mean <= 0.0;
  return static_cast<double>(k) / static_cast<double>(preds.size());
}

/// Pool average of P(g <= 0) = Phi(-mu/sigma).
inline double pf_probabilistic(const std::vector<MarginalPrediction>& preds) {
  detail::require_nonempty(preds, "pf_probabilistic");
  double s = 0.0;
  for (const auto& p : preds) s += norm_cdf_ratio(-p.mean, p.sd());
  return s / static_cast<double>(preds.size());
}

inline double var_mi(const std::vector<MarginalPrediction>& preds) {
  detail::require_nonempty(preds, "var_mi");
  double s = 0.0;
  for (const auto& p : preds) s += sigma_b2(p);
  const double n = static_cast<double>(preds.size());
  return s / (n * n);
}

/// (1/N^2) sum_jk Sigma_b[j, k] streamed through an accessor cov(j, k).
template <class Cov>
double var_mc(std::size_t n, Cov&& cov) {
  if (n == 0) throw InvalidArgument("var_mc: empty pool");
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double row = 0.0;
    for (std::size_t k = 0; k < n; ++k) row += cov(j, k);
    s += row;
  }
  const double nn = static_cast<double>(n);
  return s / (nn * nn);
}

/// var_mc from precomputed indicator-covariance row sums.
inline double var_mc_from_rows(const Vector& row_sums) {
  if (row_sums.size() == 0) throw InvalidArgument("var_mc: empty pool");
  const double nn = static_cast<double>(row_sums.size());
  return std::max(row_sums.sum(), 0.0) / (nn * nn);
}

inline double var_mc(const BernoulliField& field) { return var_mc_from_rows(field.row_sums()); }

inline constexpr double kCovMcsLimit = 0.05;

/// Coefficient of variation of a crude Monte Carlo estimate; +inf at pf in {0, 1}.
inline double cov_mcs(double pf, std::size_t n) {
  if (n == 0) throw InvalidArgument("cov_mcs: n must be >= 1");
  if (!(pf > 0.0 && pf < 1.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt((1.0 - pf) / (pf * static_cast<double>(n)));
}

inline bool cov_mcs_warning(double pf, std::size_t n) { return cov_mcs(pf, n) > kCovMcsLimit; }

inline bool stop_check(double pf, double variance, double threshold = 1e-3) {
  return pf > 0.0 && std::sqrt(std::max(variance, 0.0)) / pf <= threshold;
}

inline EstimatorStats make_stats(double pf, double variance, std::size_t n, ClassificationMode mode,
                                 CorrelationMode cm) {
  EstimatorStats s;
  s.pf_hat = pf;
  s.variance = variance;
  s.cov_estimator = pf > 0.0 ? std::sqrt(std::max(variance, 0.0)) / pf : std::numeric_limits<double>::infinity();
  s.cov_mcs = cov_mcs(pf, n);
  s.cov_mcs_warning = s.cov_mcs > kCovMcsLimit;
  s.mode = mode;
  s.correlation_mode = cm;
  return s;
}

}  // namespace akrel
