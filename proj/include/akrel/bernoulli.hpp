#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "akrel/error.hpp"
#include "akrel/kriging.hpp"
#include "akrel/normal.hpp"

namespace akrel {

/// Variance of the failure indicator 1{g <= 0} under N(mu, sigma^2).
inline double sigma_b2(const MarginalPrediction& p) {
  const double sd = p.sd();
  return norm_cdf_ratio(-p.mean, sd) * norm_cdf_ratio(p.mean, sd);
}

namespace detail {

inline constexpr double kBvnSwitch = 0.8;

inline double bvn_density(double h, double k, double hk, double r) {
  const double om = 1.0 - r * r;
  return std::exp(-(h * h + k * k - 2.0 * r * hk) / (2.0 * om)) / (kTwoPi * std::sqrt(om));
}

inline double bvn_angle_term(double t, double h2k2, double hk) {
  const double st = std::sin(t);
  return std::exp(-(h2k2 - 2.0 * hk * std::cos(t)) / (2.0 * st * st)) / kTwoPi;
}

inline double bvn_excess_pre(double h, double k, double ph, double pk, double rho);

}  // namespace detail

/// P(X <= h, Y <= k) - Phi(h) Phi(k) for standard normals with correlation rho.
/// Moderate correlations integrate the density derivative in rho with the
/// 2-point Gauss-Legendre rule; strong correlations integrate in the angle
/// acos(rho) from the exact rho = +-1 limits, where the rho form degenerates.
inline double bvn_excess(double h, double k, double rho) {
  if (!(std::abs(rho) <= 1.0)) throw InvalidArgument("bvn_orthant: |rho| must not exceed 1");
  if (rho == 0.0) return 0.0;
  return detail::bvn_excess_pre(h, k, norm_cdf(h), norm_cdf(k), rho);
}

namespace detail {

/// bvn_excess with Phi(h) and Phi(k) supplied by the caller.
inline double bvn_excess_pre(double h, double k, double ph, double pk, double rho) {
  if (rho == 0.0) return 0.0;
  // Fixed argument order keeps the result exactly symmetric under contraction.
  if (k < h) {
    std::swap(h, k);
    std::swap(ph, pk);
  }
  const double prod = ph * pk;
  const double lower = std::max(0.0, ph + pk - 1.0) - prod;
  const double upper = std::min(ph, pk) - prod;
  double ex;
  if (rho >= 1.0) {
    ex = upper;
  } else if (rho <= -1.0) {
    ex = lower;
  } else if (std::abs(rho) <= detail::kBvnSwitch) {
    static const double c1 = (3.0 - std::sqrt(3.0)) / 6.0;
    static const double c2 = (3.0 + std::sqrt(3.0)) / 6.0;
    const double hk = h * k;
    ex = 0.5 * rho * (detail::bvn_density(h, k, hk, c1 * rho) + detail::bvn_density(h, k, hk, c2 * rho));
  } else {
    static const double g = 1.0 / std::sqrt(3.0);
    const double h2k2 = h * h + k * k;
    if (rho > 0.0) {
      const double t = std::acos(rho);
      const double hk = h * k;
      const double integral = 0.5 * t *
                              (detail::bvn_angle_term(0.5 * t * (1.0 - g), h2k2, hk) +
                               detail::bvn_angle_term(0.5 * t * (1.0 + g), h2k2, hk));
      ex = upper - integral;
    } else {
      const double t = std::acos(-rho);
      const double hk = -(h * k);
      const double integral = 0.5 * t *
                              (detail::bvn_angle_term(0.5 * t * (1.0 - g), h2k2, hk) +
                               detail::bvn_angle_term(0.5 * t * (1.0 + g), h2k2, hk));
      ex = lower + integral;
    }
  }
  // Frechet bounds, and the sign of the dependence.
  ex = std::clamp(ex, lower, upper);
  return rho > 0.0 ? std::max(ex, 0.0) : std::min(ex, 0.0);
}

}  // namespace detail

/// Orthant probability P(X <= m_i, Y <= m_j), X and Y standard normal with
/// correlation rho. With m = -mu/sigma this is P(g_i <= 0, g_j <= 0).
inline double bvn_orthant(double m_i, double m_j, double rho) {
  return norm_cdf(m_i) * norm_cdf(m_j) + bvn_excess(m_i, m_j, rho);
}

/// Covariance of two failure indicators whose responses have covariance cov_ij.
inline double sigma_b_cov(const MarginalPrediction& pi, const MarginalPrediction& pj, double cov_ij) {
  const double si = pi.sd();
  const double sj = pj.sd();
  if (!(si > 0.0) || !(sj > 0.0)) return 0.0;
  double rho = std::clamp(cov_ij / (si * sj), -1.0, 1.0);
  // Round-off near +-1 is amplified by the sqrt(1 - rho) behaviour of the excess.
  if (1.0 - std::abs(rho) <= 8.0 * std::numeric_limits<double>::epsilon()) rho = rho > 0.0 ? 1.0 : -1.0;
  return bvn_excess(-pi.mean / si, -pj.mean / sj, rho);
}

/// Correlation of two failure indicators.
inline double rho_b(const MarginalPrediction& pi, const MarginalPrediction& pj, double cov_ij) {
  const double vi = sigma_b2(pi);
  const double vj = sigma_b2(pj);
  if (!(vi > 0.0) || !(vj > 0.0))
    throw DegenerateIndicator("indicator correlation undefined for a zero-variance indicator");
  const double r = sigma_b_cov(pi, pj, cov_ij) / std::sqrt(vi * vj);
  if (std::abs(r) > 1.0 + 1e-6)
    throw ConsistencyError("indicator correlation " + std::to_string(r) + " outside [-1, 1]");
  return std::clamp(r, -1.0, 1.0);
}

struct ScreeningOptions {
  /// Pairs whose prior kernel correlation is below r_min have zero indicator
  /// covariance. 0 disables this screening.
  double r_min = 1e-6;
  /// Pairs with sigma_b(i) sigma_b(j) below this bound are skipped (it bounds
  /// |Sigma_b[i,j]|). 0 disables.
  double pair_tolerance = 1e-12;
  /// Pools larger than this require r_min > 0.
  std::size_t exact_limit = 4000;
  Eigen::Index block = 128;
};

/// Indicator statistics over a candidate pool: per-point sigma_b^2 and
/// entries of the indicator covariance Sigma_b on demand.
class BernoulliField {
 public:
  BernoulliField(const KrigingModel& model, const PoolProjection& proj,
                 std::vector<MarginalPrediction> preds, ScreeningOptions opt = {})
      : model_(&model), proj_(&proj), preds_(std::move(preds)), opt_(opt) {
    const std::size_t n = preds_.size();
    if (static_cast<Eigen::Index>(n) != proj.cols())
      throw InvalidArgument("BernoulliField: prediction count differs from pool size");
    sd_.resize(n);
    sb2_.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      sd_[i] = preds_[i].sd();
      sb2_[static_cast<Eigen::Index>(i)] = sigma_b2(preds_[i]);
    }
  }

  std::size_t size() const { return preds_.size(); }
  const std::vector<MarginalPrediction>& predictions() const { return preds_; }
  const Vector& sigma_b2_values() const { return sb2_; }
  const ScreeningOptions& screening() const { return opt_; }

  /// Response covariance between pool points i and j.
  double response_cov(Eigen::Index i, Eigen::Index j) const {
    const auto& pool = proj_->pool();
    const double r = kernel(pool.row(i), pool.row(j), model_->theta());
    const double ui = proj_->vw()[i] - 1.0;
    const double uj = proj_->vw()[j] - 1.0;
    double vij = proj_->base().col(i).dot(proj_->base().col(j));
    if (proj_->extra().rows() > 0) vij += proj_->extra().col(i).dot(proj_->extra().col(j));
    return model_->sigma2() * (r + ui * uj / model_->s() - vij);
  }

  bool screened(Eigen::Index i, Eigen::Index j) const {
    if (i == j) return false;
    if (opt_.pair_tolerance > 0.0 &&
        std::sqrt(sb2_[i]) * std::sqrt(sb2_[j]) < opt_.pair_tolerance)
      return true;
    if (opt_.r_min > 0.0 &&
        kernel(proj_->pool().row(i), proj_->pool().row(j), model_->theta()) < opt_.r_min)
      return true;
    return false;
  }

  /// Sigma_b[i, j] with screening applied.
  double cov(std::size_t i, std::size_t j) const {
    if (i == j) return sb2_[static_cast<Eigen::Index>(i)];
    const auto a = static_cast<Eigen::Index>(i);
    const auto b = static_cast<Eigen::Index>(j);
    if (screened(a, b)) return 0.0;
    return sigma_b_cov(preds_[i], preds_[j], response_cov(a, b));
  }

  double rho(std::size_t i, std::size_t j) const {
    if (i == j) {
      if (!(sb2_[static_cast<Eigen::Index>(i)] > 0.0))
        throw DegenerateIndicator("indicator correlation undefined for a zero-variance indicator");
      return 1.0;
    }
    return rho_b(preds_[i], preds_[j], response_cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  }

  /// Row sums S_i = sum_k Sigma_b[i, k] with O(N) memory. Pairs are visited
  /// in blocks of rows ordered by decreasing sigma_b, with the response
  /// covariances formed by a blocked Gram product. Moderate correlations are
  /// evaluated in vector form; the rest go through bvn_excess.
  Vector row_sums() const {
    using Arr = Eigen::ArrayXd;
    const Eigen::Index n = static_cast<Eigen::Index>(size());
    if (static_cast<std::size_t>(n) > opt_.exact_limit && !(opt_.r_min > 0.0))
      throw InvalidArgument("pools larger than " + std::to_string(opt_.exact_limit) +
                            " candidates require kernel screening (r_min > 0)");
    Vector s = sb2_;
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < n; ++i)
      if (sb2_[i] > 0.0 && sd_[static_cast<std::size_t>(i)] > 0.0) act.push_back(i);
    std::stable_sort(act.begin(), act.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return sb2_[a] > sb2_[b]; });
    const Eigen::Index na = static_cast<Eigen::Index>(act.size());
    if (na < 2) return s;

    const RowMatrix& pool = proj_->pool();
    const Eigen::Index d = pool.cols();
    Arr sb(na), mm(na), ph(na), sd(na), u(na);
    Matrix xa(na, d);
    for (Eigen::Index c = 0; c < na; ++c) {
      const Eigen::Index i = act[static_cast<std::size_t>(c)];
      const auto iu = static_cast<std::size_t>(i);
      sb[c] = std::sqrt(sb2_[i]);
      sd[c] = sd_[iu];
      mm[c] = -preds_[iu].mean / sd_[iu];
      ph[c] = norm_cdf(mm[c]);
      u[c] = proj_->vw()[i] - 1.0;
      xa.row(c) = pool.row(i);
    }
    const Matrix va = proj_->gather(act);
    const Vector& theta = model_->theta();
    const double sigma2 = model_->sigma2();
    const double inv_s = 1.0 / model_->s();
    const double tol = opt_.pair_tolerance;
    const double emax = opt_.r_min > 0.0 ? -std::log(opt_.r_min) : std::numeric_limits<double>::infinity();
    const double c1 = (3.0 - std::sqrt(3.0)) / 6.0;
    const double c2 = (3.0 + std::sqrt(3.0)) / 6.0;
    Arr acc = Arr::Zero(na);
    constexpr Eigen::Index tile = 256;
    Arr e(tile), r(tile), k(tile), pk(tile), x(tile), i1(tile), i2(tile);
    std::vector<Eigen::Index> near(tile);

    const Eigen::Index bs = std::max<Eigen::Index>(opt_.block, 1);
    Matrix gt;
    for (Eigen::Index b0 = 0; b0 < na; b0 += bs) {
      const Eigen::Index b1 = std::min(na, b0 + bs);
      // Columns beyond jend cannot pass the pair tolerance for any row of the block.
      Eigen::Index jend = na;
      if (tol > 0.0) jend = std::max(b1, cutoff(sb, b0, tol / sb[b0]));
      gt.noalias() = va.middleCols(b0, jend - b0).transpose() * va.middleCols(b0, b1 - b0);
      for (Eigen::Index i = b0; i < b1; ++i) {
        const Eigen::Index jl = tol > 0.0 ? std::min(jend, cutoff(sb, i + 1, tol / sb[i])) : jend;
        const double h = mm[i];
        const double phi = ph[i];
        double rowacc = 0.0;
        for (Eigen::Index j0 = i + 1; j0 < jl; j0 += tile) {
          const Eigen::Index len = std::min(tile, jl - j0);
          auto E = e.head(len);
          E.setZero();
          for (Eigen::Index c = 0; c < d; ++c)
            E += theta[c] * (xa.col(c).segment(j0, len).array() - xa(i, c)).square();
          // Keep only pairs inside the kernel range.
          Eigen::Index nn = 0;
          for (Eigen::Index c = 0; c < len; ++c) {
            near[static_cast<std::size_t>(nn)] = c;
            nn += E[c] <= emax;
          }
          if (nn == 0) continue;
          const auto* gcol = gt.col(i - b0).data() + (j0 - b0);
          for (Eigen::Index q = 0; q < nn; ++q) {
            const Eigen::Index c = near[static_cast<std::size_t>(q)];
            const Eigen::Index j = j0 + c;
            e[q] = E[c];
            r[q] = (u[i] * inv_s) * u[j] - gcol[c];
            x[q] = sd[j];
            k[q] = mm[j];
            pk[q] = ph[j];
          }
          auto R = r.head(nn);
          auto K = k.head(nn);
          auto PK = pk.head(nn);
          auto X = x.head(nn);
          R = (sigma2 * ((-e.head(nn)).exp() + R) / (sd[i] * X)).max(-1.0).min(1.0);
          // Two-point Gauss-Legendre rule in rho; |c2 rho| < 1 so both terms are finite.
          auto I1 = i1.head(nn);
          auto I2 = i2.head(nn);
          I1 = 1.0 / (1.0 - (c1 * R).square());
          I2 = 1.0 / (1.0 - (c2 * R).square());
          X = (0.5 / kTwoPi) * R *
              ((-0.5 * (h * h + K.square() - (2.0 * c1 * h) * R * K) * I1).exp() * I1.sqrt() +
               (-0.5 * (h * h + K.square() - (2.0 * c2 * h) * R * K) * I2).exp() * I2.sqrt());
          X = X.max((phi + PK - 1.0).max(0.0) - phi * PK).min(PK.min(phi) - phi * PK);
          X = (R > 0.0).select(X.max(0.0), X.min(0.0));
          for (Eigen::Index q = 0; q < nn; ++q) {
            if (std::abs(R[q]) > detail::kBvnSwitch) X[q] = detail::bvn_excess_pre(h, K[q], phi, PK[q], R[q]);
            rowacc += X[q];
            acc[j0 + near[static_cast<std::size_t>(q)]] += X[q];
          }
        }
        acc[i] += rowacc;
      }
    }
    for (Eigen::Index c = 0; c < na; ++c) s[act[static_cast<std::size_t>(c)]] += acc[c];
    return s;
  }

 private:
  /// First index at or after `from` whose sigma_b falls below `lim`.
  static Eigen::Index cutoff(const Eigen::ArrayXd& sb, Eigen::Index from, double lim) {
    return static_cast<Eigen::Index>(
        std::partition_point(sb.data() + from, sb.data() + sb.size(), [&](double v) { return v >= lim; }) -
        sb.data());
  }

  const KrigingModel* model_;
  const PoolProjection* proj_;
  std::vector<MarginalPrediction> preds_;
  ScreeningOptions opt_;
  std::vector<double> sd_;
  Vector sb2_;
};

}  // namespace akrel
