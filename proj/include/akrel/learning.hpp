#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "akrel/bernoulli.hpp"
#include "akrel/error.hpp"
#include "akrel/kriging.hpp"
#include "akrel/normal.hpp"

namespace akrel {

enum class StrategyKind { U, EFF, H, LIF, REIF, REIF2, FNEIF, OPT_NCO, OPT_WCO };
enum class SelectionRule { minimize, maximize };

inline constexpr std::array<StrategyKind, 9> kAllStrategies = {
    StrategyKind::U,    StrategyKind::EFF,   StrategyKind::H,       StrategyKind::LIF,    StrategyKind::REIF,
    StrategyKind::REIF2, StrategyKind::FNEIF, StrategyKind::OPT_NCO, StrategyKind::OPT_WCO};

inline SelectionRule rule_of(StrategyKind k) {
  return k == StrategyKind::U ? SelectionRule::minimize : SelectionRule::maximize;
}

inline std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::U: return "u";
    case StrategyKind::EFF: return "eff";
    case StrategyKind::H: return "h";
    case StrategyKind::LIF: return "lif";
    case StrategyKind::REIF: return "reif";
    case StrategyKind::REIF2: return "reif2";
    case StrategyKind::FNEIF: return "fneif";
    case StrategyKind::OPT_NCO: return "opt_nco";
    case StrategyKind::OPT_WCO: return "opt_wco";
  }
  return "?";
}

inline std::string lower_case(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline StrategyKind parse_strategy(std::string_view name) {
  const std::string n = lower_case(name);
  for (StrategyKind k : kAllStrategies)
    if (n == to_string(k)) return k;
  throw InvalidArgument("unknown strategy '" + std::string(name) +
                        "' (expected u, eff, h, lif, reif, reif2, fneif, opt_nco or opt_wco)");
}

using Predictions = std::vector<MarginalPrediction>;

inline double u_value(const MarginalPrediction& p) {
  const double sd = p.sd();
  if (sd > 0.0) return std::abs(p.mean) / sd;
  return std::numeric_limits<double>::infinity();
}

/// Mean of |g| for g ~ N(mu, sigma^2).
inline double folded_mean(double mu, double sigma) {
  if (!(sigma > 0.0)) return std::abs(mu);
  return std::sqrt(2.0 / std::numbers::pi) * sigma * std::exp(-mu * mu / (2.0 * sigma * sigma)) +
         mu * (2.0 * norm_cdf(mu / sigma) - 1.0);
}

/// Standard deviation of |g|; a radicand below round-off level is an error.
inline double folded_sd(double mu, double sigma, double mu_f) {
  const double scale = mu * mu + sigma * sigma;
  const double r = scale - mu_f * mu_f;
  if (r < -1e-12 * std::max(scale, 1.0))
    throw ConsistencyError("negative folded-normal variance " + std::to_string(r));
  return r > 0.0 ? std::sqrt(r) : 0.0;
}

inline double eff_value(double mu, double sd) {
  if (!(sd > 0.0)) return 0.0;
  const double a = 2.0 * sd;
  const double z0 = -mu / sd;
  const double zm = (-a - mu) / sd;
  const double zp = (a - mu) / sd;
  return mu * (2.0 * norm_cdf(z0) - norm_cdf(zm) - norm_cdf(zp)) -
         sd * (2.0 * norm_pdf(z0) - norm_pdf(zm) - norm_pdf(zp)) +
         2.0 * sd * (norm_cdf(zp) - norm_cdf(zm));
}

inline double h_value(double mu, double sd) {
  if (!(sd > 0.0)) return 0.0;
  const double zp = (2.0 * sd - mu) / sd;
  const double zm = (-2.0 * sd - mu) / sd;
  const double t1 = std::log(std::sqrt(kTwoPi) * sd + 0.5) * (norm_cdf(zp) - norm_cdf(zm));
  const double t2 = 0.5 * (2.0 * sd - mu) * norm_pdf(zp) + 0.5 * (2.0 * sd + mu) * norm_pdf(zm);
  return std::abs(t1 - t2);
}

inline double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

/// E-type moment bracket of the LIF function for problem dimension n.
inline double lif_bracket(double mu, double sd, int n) {
  if (n % 2 == 0) {
    double b = std::pow(mu, n);
    double dfact = 1.0;  // (2m-1)!!
    for (int m = 1; m <= n / 2; ++m) {
      dfact *= 2.0 * m - 1.0;
      b += binomial(n, 2 * m) * std::pow(mu, n - 2 * m) * std::pow(sd, 2 * m) * dfact;
    }
    return b;
  }
  // I_m = int_a^inf t^m exp(-t^2/2) dt with a = mu / sd.
  const double a = mu / sd;
  const double ea = std::exp(-0.5 * a * a);
  std::vector<double> im(static_cast<std::size_t>(n) + 1);
  im[0] = std::sqrt(kTwoPi) * norm_cdf(-a);
  if (n >= 1) im[1] = ea;
  for (int m = 2; m <= n; ++m)
    im[static_cast<std::size_t>(m)] = std::pow(a, m - 1) * ea + (m - 1) * im[static_cast<std::size_t>(m - 2)];
  double b = 0.0;
  for (int m = 0; m <= n; ++m)
    b += binomial(n, m) * std::pow(mu, n - m) * std::pow(sd, m) * im[static_cast<std::size_t>(m)];
  return std::sqrt(2.0 / std::numbers::pi) * b;
}

inline double lif_value(double mu, double sd, double density, int n) {
  if (!(sd > 0.0) || density == 0.0) return 0.0;
  return norm_cdf(-std::abs(mu) / sd) * density * lif_bracket(mu, sd, n);
}

inline double reif_value(double mu, double sd) { return 2.0 * sd - folded_mean(mu, sd); }

inline double fneif_value(double mu, double sd) {
  const double mf = folded_mean(mu, sd);
  const double sf = folded_sd(mu, sd, mf);
  auto P = [&](double num) { return norm_cdf_ratio(num, sd); };
  const double band = 2.0 * sf * (P(2.0 * sf - mu) - P(-2.0 * sf - mu));
  if (2.0 * sf >= mf) {
    return band +
           mf * (P(mf - mu) - P(-mf - mu) - P(2.0 * sf - mu) + P(-2.0 * sf - mu) - 1.0) +
           sd * (P(mf + mu) + P(mf - mu)) + mu * (P(mf + mu) - P(mf - mu));
  }
  return band - mf + sd * (P(2.0 * sf + mu) + P(2.0 * sf - mu)) +
         mu * (P(2.0 * sf + mu) - P(2.0 * sf - mu));
}

/// Phi(-U) Phi(U), evaluated from the same U as score_u.
inline double nco_value(const MarginalPrediction& p) {
  const double u = u_value(p);
  return norm_cdf(-u) * norm_cdf(u);
}

template <class F>
Vector map_scores(const Predictions& preds, F&& f) {
  Vector s(static_cast<Eigen::Index>(preds.size()));
  for (std::size_t i = 0; i < preds.size(); ++i) s[static_cast<Eigen::Index>(i)] = f(i, preds[i]);
  return s;
}

inline Vector score_u(const Predictions& p) {
  return map_scores(p, [](std::size_t, const MarginalPrediction& q) { return u_value(q); });
}
inline Vector score_eff(const Predictions& p) {
  return map_scores(p, [](std::size_t, const MarginalPrediction& q) { return eff_value(q.mean, q.sd()); });
}
inline Vector score_h(const Predictions& p) {
  return map_scores(p, [](std::size_t, const MarginalPrediction& q) { return h_value(q.mean, q.sd()); });
}
inline Vector score_lif(const Predictions& p, const Vector& densities, int dim) {
  if (densities.size() != static_cast<Eigen::Index>(p.size()))
    throw InvalidArgument("score_lif: density count differs from pool size");
  if (dim < 1) throw InvalidArgument("score_lif: dimension must be >= 1");
  return map_scores(p, [&](std::size_t i, const MarginalPrediction& q) {
    return lif_value(q.mean, q.sd(), densities[static_cast<Eigen::Index>(i)], dim);
  });
}
inline Vector score_reif(const Predictions& p) {
  return map_scores(p, [](std::size_t, const MarginalPrediction& q) { return reif_value(q.mean, q.sd()); });
}
inline Vector score_reif2(const Predictions& p, const Vector& densities) {
  if (densities.size() != static_cast<Eigen::Index>(p.size()))
    throw InvalidArgument("score_reif2: density count differs from pool size");
  return map_scores(p, [&](std::size_t i, const MarginalPrediction& q) {
    return reif_value(q.mean, q.sd()) * densities[static_cast<Eigen::Index>(i)];
  });
}
inline Vector score_fneif(const Predictions& p) {
  return map_scores(p, [](std::size_t, const MarginalPrediction& q) { return fneif_value(q.mean, q.sd()); });
}
inline Vector score_opt_nco(const Predictions& p) {
  return map_scores(p, [](std::size_t, const MarginalPrediction& q) { return nco_value(q); });
}

/// Gamma(x_i) = 2 S_i - sigma_b^2(x_i) from indicator-covariance row sums.
inline Vector wco_from_rows(const Vector& row_sums, const Vector& sb2) { return 2.0 * row_sums - sb2; }

inline Vector score_opt_wco(const BernoulliField& field) {
  return wco_from_rows(field.row_sums(), field.sigma_b2_values());
}

/// Index of the best non-excluded score; ties go to the lowest index and NaN
/// scores are never chosen.
inline std::size_t select(const Vector& scores, SelectionRule rule, const std::vector<bool>& excluded = {}) {
  std::size_t best = static_cast<std::size_t>(-1);
  double bv = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (ui < excluded.size() && excluded[ui]) continue;
    const double v = scores[i];
    if (std::isnan(v)) continue;
    if (best == static_cast<std::size_t>(-1) ||
        (rule == SelectionRule::minimize ? v < bv : v > bv)) {
      best = ui;
      bv = v;
    }
  }
  if (best == static_cast<std::size_t>(-1)) throw InvalidArgument("select: every candidate is excluded");
  return best;
}

inline std::size_t select(const Vector& scores, SelectionRule rule, const std::set<std::size_t>& excluded) {
  std::vector<bool> mask(static_cast<std::size_t>(scores.size()), false);
  for (std::size_t i : excluded)
    if (i < mask.size()) mask[i] = true;
  return select(scores, rule, mask);
}

/// Classic per-function stopping rules: min U >= 2 and max EFF <= 0.001.
inline bool classic_stop(StrategyKind k, const Vector& scores, const std::vector<bool>& excluded) {
  double best = k == StrategyKind::U ? std::numeric_limits<double>::infinity()
                                     : -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (static_cast<std::size_t>(i) < excluded.size() && excluded[static_cast<std::size_t>(i)]) continue;
    best = k == StrategyKind::U ? std::min(best, scores[i]) : std::max(best, scores[i]);
  }
  if (k == StrategyKind::U) return best >= 2.0;
  if (k == StrategyKind::EFF) return best <= 1e-3;
  return false;
}

inline bool has_classic_stop(StrategyKind k) { return k == StrategyKind::U || k == StrategyKind::EFF; }

}  // namespace akrel
