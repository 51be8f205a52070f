#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "akrel/error.hpp"
#include "akrel/rv_model.hpp"

namespace akrel {

/// Evaluated training points (one per row) and their responses.
struct DesignOfExperiment {
  RowMatrix points;
  Vector responses;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }
};

inline constexpr double kDuplicateTolerance = 1e-12;

struct MarginalPrediction {
  double mean = 0.0;
  double variance = 0.0;
  double sd() const { return std::sqrt(variance); }
};

struct JointPrediction {
  Vector mean;
  Matrix covariance;
};

/// Search box for the kernel scales. Scalar bounds apply to every dimension
/// unless per-dimension vectors are given.
struct ThetaBounds {
  double lower = 1e-2;
  double upper = 10.0;
  Vector lower_dims;
  Vector upper_dims;

  double lo(std::size_t i) const { return lower_dims.size() ? lower_dims[i] : lower; }
  double hi(std::size_t i) const { return upper_dims.size() ? upper_dims[i] : upper; }
};

struct JitterPolicy {
  double start = 1e-10;
  double max = 1e-6;
  double factor = 10.0;
};

struct MleOptions {
  ThetaBounds bounds;
  int n_starts = 8;
  int max_evals = 200;
  double tol = 1e-4;
  // Initial pattern step for a warm-started search (log scale).
  double warm_step = 0.25;
};

template <class A, class B, class T>
double kernel(const A& xi, const B& xj, const T& theta) {
  double e = 0.0;
  for (Eigen::Index n = 0; n < theta.size(); ++n) {
    const double dx = xi[n] - xj[n];
    e += theta[n] * dx * dx;
  }
  return std::exp(-e);
}

/// Kernel with argument validation, for external callers.
template <class A, class B, class T>
double kernel_checked(const A& xi, const B& xj, const T& theta) {
  if (xi.size() != xj.size() || xi.size() != theta.size())
    throw InvalidArgument("kernel: dimension mismatch");
  for (Eigen::Index n = 0; n < theta.size(); ++n)
    if (!(theta[n] > 0.0)) throw InvalidArgument("kernel: theta must be positive");
  return kernel(xi, xj, theta);
}

namespace detail {

inline Matrix correlation_matrix(const RowMatrix& x, const Vector& theta) {
  const Eigen::Index m = x.rows();
  Matrix r(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    r(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < m; ++i) r(i, j) = r(j, i) = kernel(x.row(i), x.row(j), theta);
  }
  return r;
}

/// Cholesky of R + jitter I with escalating jitter. Returns false when every
/// jitter level fails.
inline bool factor(const Matrix& r, const JitterPolicy& jp, Matrix& l, double& jitter) {
  if (!(jp.start > 0.0) || !(jp.max >= jp.start) || !(jp.factor > 1.0))
    throw InvalidArgument("jitter policy needs 0 < start <= max and factor > 1");
  const Eigen::Index m = r.rows();
  Matrix a = r;
  for (double j = jp.start; j <= jp.max * (1.0 + 1e-12); j *= jp.factor) {
    a.diagonal() = Vector::Constant(m, 1.0 + j);
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) {
      l = llt.matrixL();
      jitter = j;
      return true;
    }
  }
  return false;
}

inline void check_doe(const DesignOfExperiment& doe) {
  const Eigen::Index m = doe.points.rows();
  if (m < 2) throw InvalidArgument("design of experiments needs at least 2 points");
  if (doe.responses.size() != m) throw InvalidArgument("design points and responses differ in count");
  if (!doe.points.allFinite() || !doe.responses.allFinite())
    throw InvalidArgument("design of experiments contains non-finite values");
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      if ((doe.points.row(i) - doe.points.row(j)).norm() <= kDuplicateTolerance)
        throw DuplicatePoints("design points " + std::to_string(j) + " and " + std::to_string(i) +
                              " coincide");
}

}  // namespace detail

/// Ordinary Kriging surrogate with a Gaussian kernel. Immutable once built.
class KrigingModel {
 public:
  /// Model at fixed theta (no likelihood search).
  static KrigingModel with_theta(DesignOfExperiment doe, const Vector& theta,
                                 const JitterPolicy& jp = {}) {
    detail::check_doe(doe);
    if (theta.size() != doe.points.cols()) throw InvalidArgument("theta dimension mismatch");
    KrigingModel k;
    k.doe_ = std::move(doe);
    k.theta_ = theta;
    k.jp_ = jp;
    if (!detail::factor(detail::correlation_matrix(k.doe_.points, theta), jp, k.l_, k.jitter_))
      throw SingularCorrelation("correlation matrix not positive definite at jitter " +
                                std::to_string(jp.max));
    k.solve_trend();
    return k;
  }

  /// Multi-start maximum-likelihood fit.
  static KrigingModel fit(DesignOfExperiment doe, const MleOptions& opt = {},
                          const JitterPolicy& jp = {});

  /// Single pattern search started from `theta0`.
  static KrigingModel fit_warm(DesignOfExperiment doe, const Vector& theta0,
                               const MleOptions& opt = {}, const JitterPolicy& jp = {});

  /// Concentrated likelihood objective |R|^(1/m) sigma^2; +inf if R cannot be factored.
  static double mle_objective(const RowMatrix& x, const Vector& y, const Vector& theta,
                              const JitterPolicy& jp = {}) {
    Matrix l;
    double jit;
    if (!detail::factor(detail::correlation_matrix(x, theta), jp, l, jit))
      return std::numeric_limits<double>::infinity();
    const auto tri = l.triangularView<Eigen::Lower>();
    const Vector w = tri.solve(Vector::Ones(x.rows()));
    const Vector q = tri.solve(y);
    const double beta = w.dot(q) / w.squaredNorm();
    const double sigma2 = (q - beta * w).squaredNorm() / static_cast<double>(x.rows());
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    return std::exp(logdet / static_cast<double>(x.rows())) * sigma2;
  }

  /// Model on the design augmented by (x_new, y). With reoptimize false the
  /// factor is extended by one row and theta is kept.
  template <class Point>
  KrigingModel refit_with(const Point& x_new, double y, bool reoptimize,
                          const MleOptions& opt = {}) const {
    const Eigen::Index m = doe_.points.rows();
    const Eigen::Index d = doe_.points.cols();
    if (x_new.size() != d) throw InvalidArgument("refit_with: dimension mismatch");
    if (!std::isfinite(y)) throw InvalidArgument("refit_with: non-finite response");
    for (Eigen::Index i = 0; i < m; ++i)
      if ((doe_.points.row(i).transpose() - Vector(x_new)).norm() <= kDuplicateTolerance)
        throw DuplicatePoints("refit_with: point already in the design");
    DesignOfExperiment aug;
    aug.points.resize(m + 1, d);
    aug.points.topRows(m) = doe_.points;
    aug.points.row(m) = Vector(x_new).transpose();
    aug.responses.resize(m + 1);
    aug.responses.head(m) = doe_.responses;
    aug.responses[m] = y;
    if (reoptimize) return fit(std::move(aug), opt, jp_);

    Vector r(m);
    for (Eigen::Index i = 0; i < m; ++i) r[i] = kernel(doe_.points.row(i), aug.points.row(m), theta_);
    const Vector lrow = l_.triangularView<Eigen::Lower>().solve(r);
    const double d2 = 1.0 + jitter_ - lrow.squaredNorm();
    if (!(d2 > 1e-3 * jitter_)) return with_theta(std::move(aug), theta_, jp_);
    const double dd = std::sqrt(d2);

    KrigingModel k;
    k.doe_ = std::move(aug);
    k.theta_ = theta_;
    k.jp_ = jp_;
    k.jitter_ = jitter_;
    k.l_ = Matrix::Zero(m + 1, m + 1);
    k.l_.topLeftCorner(m, m) = l_;
    k.l_.block(m, 0, 1, m) = lrow.transpose();
    k.l_(m, m) = dd;
    k.w_.resize(m + 1);
    k.w_.head(m) = w_;
    k.w_[m] = (1.0 - lrow.dot(w_)) / dd;
    k.q_.resize(m + 1);
    k.q_.head(m) = q_;
    k.q_[m] = (y - lrow.dot(q_)) / dd;
    k.finish_trend();
    return k;
  }

  const DesignOfExperiment& doe() const { return doe_; }
  const Vector& theta() const { return theta_; }
  double beta() const { return beta_; }
  double sigma2() const { return sigma2_; }
  double jitter() const { return jitter_; }
  const JitterPolicy& jitter_policy() const { return jp_; }
  const Matrix& chol() const { return l_; }
  const Vector& gamma() const { return gamma_; }
  /// L^-1 1, L^-1 Y and their trend residual L^-1 (Y - beta 1).
  const Vector& w() const { return w_; }
  const Vector& q() const { return q_; }
  const Vector& z() const { return z_; }
  /// 1^T R^-1 1.
  double s() const { return s_; }
  double objective() const { return std::exp(2.0 * l_.diagonal().array().log().sum() / double(size())) * sigma2_; }
  std::size_t size() const { return doe_.size(); }
  std::size_t dim() const { return doe_.dim(); }

  template <class Point>
  Vector correlations(const Point& x) const {
    const Eigen::Index m = doe_.points.rows();
    Vector r(m);
    for (Eigen::Index i = 0; i < m; ++i) r[i] = kernel(doe_.points.row(i), x, theta_);
    return r;
  }

  template <class Point>
  MarginalPrediction predict(const Point& x) const {
    if (static_cast<std::size_t>(x.size()) != dim()) throw InvalidArgument("predict: dimension mismatch");
    const Vector v = l_.triangularView<Eigen::Lower>().solve(correlations(x));
    return from_projection(v.dot(w_), v.squaredNorm(), v.dot(q_));
  }

  /// Prediction from v = L^-1 r(x) summarized by v.w, |v|^2 and v.q.
  MarginalPrediction from_projection(double vw, double vv, double vq) const {
    const double u = vw - 1.0;
    const double var = sigma2_ * (1.0 + u * u / s_ - vv);
    return {beta_ + vq - beta_ * vw, var > 0.0 ? var : 0.0};
  }

  std::vector<MarginalPrediction> predict_marginal(const RowMatrix& pts) const {
    check_points(pts);
    const Matrix v = project(pts);
    std::vector<MarginalPrediction> out(static_cast<std::size_t>(pts.rows()));
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      const auto c = v.col(i);
      out[static_cast<std::size_t>(i)] = from_projection(c.dot(w_), c.squaredNorm(), c.dot(q_));
    }
    return out;
  }

  JointPrediction predict_joint(const RowMatrix& pts) const {
    check_points(pts);
    if (pts.rows() < 1) throw InvalidArgument("predict_joint: empty point set");
    const Matrix v = project(pts);
    const Eigen::Index n = pts.rows();
    const Vector u = v.transpose() * w_ - Vector::Ones(n);
    JointPrediction jp;
    jp.mean = Vector::Constant(n, beta_) + v.transpose() * z_;
    Matrix cov = detail::correlation_matrix(pts, theta_);
    cov.noalias() += (u * u.transpose()) / s_;
    cov.noalias() -= v.transpose() * v;
    cov *= sigma2_;
    jp.covariance = 0.5 * (cov + cov.transpose());
    for (Eigen::Index i = 0; i < n; ++i)
      if (jp.covariance(i, i) < 0.0) jp.covariance(i, i) = 0.0;
    return jp;
  }

  /// One entry of the joint covariance without forming the matrix.
  template <class A, class B>
  double pairwise_cov(const A& xi, const B& xj) const {
    const auto tri = l_.triangularView<Eigen::Lower>();
    const Vector vi = tri.solve(correlations(xi));
    const Vector vj = tri.solve(correlations(xj));
    const double ui = vi.dot(w_) - 1.0;
    const double uj = vj.dot(w_) - 1.0;
    return sigma2_ * (kernel(xi, xj, theta_) + ui * uj / s_ - vi.dot(vj));
  }

  /// V = L^-1 r(points), one column per point.
  Matrix project(const RowMatrix& pts) const {
    const Eigen::Index m = doe_.points.rows();
    Matrix r(m, pts.rows());
    for (Eigen::Index c = 0; c < pts.rows(); ++c)
      for (Eigen::Index i = 0; i < m; ++i) r(i, c) = kernel(doe_.points.row(i), pts.row(c), theta_);
    l_.triangularView<Eigen::Lower>().solveInPlace(r);
    return r;
  }

 private:
  void check_points(const RowMatrix& pts) const {
    if (static_cast<std::size_t>(pts.cols()) != dim())
      throw InvalidArgument("prediction points have dimension " + std::to_string(pts.cols()) +
                            ", model has " + std::to_string(dim()));
  }

  void solve_trend() {
    const auto tri = l_.triangularView<Eigen::Lower>();
    w_ = tri.solve(Vector::Ones(doe_.points.rows()));
    q_ = tri.solve(doe_.responses);
    finish_trend();
  }

  void finish_trend() {
    s_ = w_.squaredNorm();
    beta_ = w_.dot(q_) / s_;
    z_ = q_ - beta_ * w_;
    sigma2_ = z_.squaredNorm() / static_cast<double>(doe_.points.rows());
    gamma_ = l_.triangularView<Eigen::Lower>().transpose().solve(z_);
  }

  DesignOfExperiment doe_;
  Vector theta_;
  JitterPolicy jp_;
  double jitter_ = 0.0;
  Matrix l_;
  Vector w_, q_, z_, gamma_;
  double s_ = 0.0, beta_ = 0.0, sigma2_ = 0.0;
};

namespace detail {

/// Hooke-Jeeves pattern search in log(theta) within a box; returns the best
/// point found and its objective value.
template <class F>
std::pair<Vector, double> hooke_jeeves(F&& f, Vector x, const Vector& lo, const Vector& hi,
                                       double step, double tol, int max_evals) {
  int evals = 0;
  auto eval = [&](const Vector& p) {
    ++evals;
    return f(p);
  };
  auto clamp = [&](Vector p) {
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], lo[i], hi[i]);
    return p;
  };
  auto explore = [&](Vector base, double fb) {
    for (Eigen::Index i = 0; i < base.size() && evals < max_evals; ++i) {
      for (double sgn : {1.0, -1.0}) {
        Vector t = base;
        t[i] = std::clamp(t[i] + sgn * step, lo[i], hi[i]);
        if (t[i] == base[i]) continue;
        const double ft = eval(t);
        if (ft < fb) {
          base = t;
          fb = ft;
          break;
        }
        if (evals >= max_evals) break;
      }
    }
    return std::pair<Vector, double>(base, fb);
  };

  x = clamp(x);
  double fx = eval(x);
  while (step >= tol && evals < max_evals) {
    auto [y, fy] = explore(x, fx);
    if (fy < fx) {
      while (evals < max_evals) {
        const Vector xp = clamp(y + (y - x));
        x = y;
        fx = fy;
        const double fp = eval(xp);
        auto [y2, fy2] = explore(xp, fp);
        if (fy2 < fx) {
          y = y2;
          fy = fy2;
        } else {
          break;
        }
      }
    } else {
      step *= 0.5;
    }
  }
  return {x, fx};
}

inline void log_bounds(const ThetaBounds& b, std::size_t d, Vector& lo, Vector& hi) {
  lo.resize(static_cast<Eigen::Index>(d));
  hi.resize(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    if (!(b.lo(i) > 0.0) || !(b.hi(i) >= b.lo(i)))
      throw InvalidArgument("theta bounds must satisfy 0 < lower <= upper");
    lo[static_cast<Eigen::Index>(i)] = std::log(b.lo(i));
    hi[static_cast<Eigen::Index>(i)] = std::log(b.hi(i));
  }
}

}  // namespace detail

/// Log-space start points of the multi-start search: start k uses level
/// (k + 3 n) mod K in dimension n of a K-level grid.
inline std::vector<Vector> mle_starts(const ThetaBounds& b, std::size_t d, int n_starts) {
  Vector lo, hi;
  detail::log_bounds(b, d, lo, hi);
  std::vector<Vector> out;
  for (int k = 0; k < n_starts; ++k) {
    Vector s(static_cast<Eigen::Index>(d));
    for (std::size_t n = 0; n < d; ++n) {
      const int level = (k + 3 * static_cast<int>(n)) % n_starts;
      const auto i = static_cast<Eigen::Index>(n);
      s[i] = lo[i] + (level + 0.5) * (hi[i] - lo[i]) / n_starts;
    }
    out.push_back(s);
  }
  return out;
}

inline KrigingModel KrigingModel::fit(DesignOfExperiment doe, const MleOptions& opt,
                                      const JitterPolicy& jp) {
  detail::check_doe(doe);
  const std::size_t d = doe.dim();
  Vector lo, hi;
  detail::log_bounds(opt.bounds, d, lo, hi);
  auto f = [&](const Vector& lt) {
    return mle_objective(doe.points, doe.responses, lt.array().exp().matrix(), jp);
  };
  Vector best;
  double fbest = std::numeric_limits<double>::infinity();
  const double step = 0.5 * (hi - lo).maxCoeff() / std::max(opt.n_starts, 1);
  for (const Vector& s : mle_starts(opt.bounds, d, std::max(opt.n_starts, 1))) {
    auto [x, fx] = detail::hooke_jeeves(f, s, lo, hi, std::max(step, opt.tol), opt.tol, opt.max_evals);
    if (best.size() == 0 || fx < fbest) {
      best = x;
      fbest = fx;
    }
  }
  return with_theta(std::move(doe), best.array().exp().matrix(), jp);
}

inline KrigingModel KrigingModel::fit_warm(DesignOfExperiment doe, const Vector& theta0,
                                           const MleOptions& opt, const JitterPolicy& jp) {
  detail::check_doe(doe);
  const std::size_t d = doe.dim();
  if (static_cast<std::size_t>(theta0.size()) != d) throw InvalidArgument("fit_warm: theta dimension mismatch");
  Vector lo, hi;
  detail::log_bounds(opt.bounds, d, lo, hi);
  auto f = [&](const Vector& lt) {
    return mle_objective(doe.points, doe.responses, lt.array().exp().matrix(), jp);
  };
  auto [x, fx] = detail::hooke_jeeves(f, theta0.array().log().matrix(), lo, hi,
                                      std::max(opt.warm_step, opt.tol), opt.tol, opt.max_evals);
  (void)fx;
  return with_theta(std::move(doe), x.array().exp().matrix(), jp);
}

inline KrigingModel fit(DesignOfExperiment doe, const ThetaBounds& bounds = {},
                        const JitterPolicy& jp = {}) {
  MleOptions opt;
  opt.bounds = bounds;
  return KrigingModel::fit(std::move(doe), opt, jp);
}

inline std::vector<MarginalPrediction> predict_marginal(const KrigingModel& k, const RowMatrix& pts) {
  return k.predict_marginal(pts);
}

inline JointPrediction predict_joint(const KrigingModel& k, const RowMatrix& pts) {
  return k.predict_joint(pts);
}

/// Pool projection V = L^-1 r(pool) of a model, extendable by fantasy rows.
/// The base block is shared between extensions; each fantasy point adds one
/// row computed in O(mN).
class PoolProjection {
 public:
  PoolProjection() = default;
  PoolProjection(const KrigingModel& k, const RowMatrix& pool)
      : pool_(&pool), base_(std::make_shared<const Matrix>(k.project(pool))), extra_(0, pool.rows()) {
    summarize(k);
  }

  /// Projection for `aug`, which must be this projection's model refit with
  /// exactly one more point at fixed theta and jitter.
  PoolProjection extend(const KrigingModel& aug) const {
    const Eigen::Index m = rows();
    if (static_cast<Eigen::Index>(aug.size()) != m + 1)
      throw InvalidArgument("PoolProjection::extend: model must have exactly one more point");
    // A refit that had to refactor from scratch no longer shares the factor.
    if (aug.chol().diagonal().head(m) != diag_) return PoolProjection(aug, *pool_);
    const Eigen::Index mb = base_->rows();
    const Eigen::Index n = pool_->rows();
    const auto lrow = aug.chol().row(m);
    const double dd = lrow[m];
    const auto xnew = aug.doe().points.row(m);
    const auto& theta = aug.theta();

    Vector e(n);
    for (Eigen::Index c = 0; c < n; ++c) e[c] = kernel(pool_->row(c), xnew, theta);
    e.noalias() -= base_->transpose() * lrow.head(mb).transpose();
    if (extra_.rows() > 0) e.noalias() -= extra_.transpose() * lrow.segment(mb, extra_.rows()).transpose();
    e /= dd;

    PoolProjection p;
    p.pool_ = pool_;
    p.base_ = base_;
    p.extra_.resize(extra_.rows() + 1, n);
    p.extra_.topRows(extra_.rows()) = extra_;
    p.extra_.row(extra_.rows()) = e.transpose();
    p.vv_ = vv_ + e.cwiseAbs2();
    // w and q of `aug` share their first m entries with the base model.
    p.vw_ = vw_ + aug.w()[m] * e;
    p.vq_ = vq_ + aug.q()[m] * e;
    p.diag_ = aug.chol().diagonal();
    return p;
  }

  Eigen::Index rows() const { return base_->rows() + extra_.rows(); }
  Eigen::Index cols() const { return base_->cols(); }
  const RowMatrix& pool() const { return *pool_; }
  const Matrix& base() const { return *base_; }
  const Matrix& extra() const { return extra_; }
  const Vector& vv() const { return vv_; }
  const Vector& vw() const { return vw_; }
  const Vector& vq() const { return vq_; }

  std::vector<MarginalPrediction> predictions(const KrigingModel& k) const {
    std::vector<MarginalPrediction> out(static_cast<std::size_t>(cols()));
    for (Eigen::Index i = 0; i < cols(); ++i)
      out[static_cast<std::size_t>(i)] = k.from_projection(vw_[i], vv_[i], vq_[i]);
    return out;
  }

  /// Gathers the projection columns `idx` into an (m x |idx|) matrix.
  Matrix gather(const std::vector<Eigen::Index>& idx) const {
    Matrix g(rows(), static_cast<Eigen::Index>(idx.size()));
    const Eigen::Index mb = base_->rows();
    for (std::size_t c = 0; c < idx.size(); ++c) {
      const auto cc = static_cast<Eigen::Index>(c);
      g.col(cc).head(mb) = base_->col(idx[c]);
      if (extra_.rows() > 0) g.col(cc).tail(extra_.rows()) = extra_.col(idx[c]);
    }
    return g;
  }

 private:
  void summarize(const KrigingModel& k) {
    vv_ = base_->colwise().squaredNorm().transpose();
    vw_ = base_->transpose() * k.w();
    vq_ = base_->transpose() * k.q();
    diag_ = k.chol().diagonal();
  }

  const RowMatrix* pool_ = nullptr;
  std::shared_ptr<const Matrix> base_;
  Matrix extra_;
  Vector vv_, vw_, vq_, diag_;
};

}  // namespace akrel
