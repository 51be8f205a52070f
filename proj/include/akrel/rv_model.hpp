#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "akrel/error.hpp"
#include "akrel/normal.hpp"
#include "akrel/rng.hpp"

namespace akrel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Point sets are stored one point per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Marginal {
  enum class Kind { standard_normal, normal };
  Kind kind = Kind::standard_normal;
  double mean = 0.0;
  double std = 1.0;

  static Marginal standard() { return {}; }
  static Marginal gaussian(double mean, double std) { return {Kind::normal, mean, std}; }
};

/// Independent marginals, one per input dimension.
class RandomVariableSpec {
 public:
  RandomVariableSpec() = default;
  explicit RandomVariableSpec(std::vector<Marginal> marginals) : m_(std::move(marginals)) {
    validate();
  }

  static RandomVariableSpec standard_normal(std::size_t d) {
    return RandomVariableSpec(std::vector<Marginal>(d, Marginal::standard()));
  }

  std::size_t dim() const { return m_.size(); }
  const Marginal& operator[](std::size_t i) const { return m_[i]; }
  const std::vector<Marginal>& marginals() const { return m_; }

  void validate() const {
    if (m_.empty()) throw InvalidArgument("random variable spec needs at least one dimension");
    for (std::size_t i = 0; i < m_.size(); ++i) {
      const auto& mg = m_[i];
      if (mg.kind == Marginal::Kind::standard_normal && (mg.mean != 0.0 || mg.std != 1.0))
        throw InvalidArgument("standard_normal marginal " + std::to_string(i) +
                              " must have mean 0 and std 1");
      if (!(mg.std > 0.0) || !std::isfinite(mg.std) || !std::isfinite(mg.mean))
        throw InvalidArgument("marginal " + std::to_string(i) + " needs finite mean and std > 0");
    }
  }

  double quantile(std::size_t i, double p) const { return m_[i].mean + m_[i].std * norm_ppf(p); }

 private:
  std::vector<Marginal> m_;
};

struct SamplePool {
  enum class Origin { lhs, monte_carlo };
  RowMatrix points;
  Origin origin = Origin::lhs;
  std::uint64_t seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }
};

/// Latin hypercube sample. With `midpoint` the point sits at the centre of its
/// stratum instead of a uniform position inside it.
inline SamplePool lhs_sample(const RandomVariableSpec& spec, std::size_t n, std::uint64_t seed,
                             bool midpoint = false) {
  spec.validate();
  if (n == 0) throw InvalidArgument("lhs_sample: n must be >= 1");
  const std::size_t d = spec.dim();
  SamplePool pool{RowMatrix(n, d), SamplePool::Origin::lhs, seed};
  Rng rng(seed);
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = midpoint ? 0.5 : rng.uniform();
      const double p = (static_cast<double>(perm[i]) + u) / static_cast<double>(n);
      pool.points(i, j) = spec.quantile(j, p);
    }
  }
  return pool;
}

inline SamplePool mc_sample(const RandomVariableSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw InvalidArgument("mc_sample: n must be >= 1");
  const std::size_t d = spec.dim();
  SamplePool pool{RowMatrix(n, d), SamplePool::Origin::monte_carlo, seed};
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) pool.points(i, j) = spec[j].mean + spec[j].std * rng.normal();
  return pool;
}

template <class Point>
double joint_pdf(const RandomVariableSpec& spec, const Point& x) {
  if (static_cast<std::size_t>(x.size()) != spec.dim())
    throw InvalidArgument("joint_pdf: dimension mismatch");
  double f = 1.0;
  for (std::size_t j = 0; j < spec.dim(); ++j) {
    const double z = (x[j] - spec[j].mean) / spec[j].std;
    f *= norm_pdf(z) / spec[j].std;
  }
  return f;
}

inline Vector joint_pdf(const RandomVariableSpec& spec, const RowMatrix& pts) {
  Vector f(pts.rows());
  for (Eigen::Index i = 0; i < pts.rows(); ++i) f[i] = joint_pdf(spec, pts.row(i));
  return f;
}

}  // namespace akrel
