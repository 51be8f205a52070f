#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "akrel/bernoulli.hpp"
#include "akrel/error.hpp"
#include "akrel/kriging.hpp"
#include "akrel/learning.hpp"
#include "akrel/rng.hpp"

namespace akrel {

enum class PolicyKind { MMSE, MAPE, MMAE };

inline std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::MMSE: return "mmse";
    case PolicyKind::MAPE: return "mape";
    case PolicyKind::MMAE: return "mmae";
  }
  return "?";
}

inline PolicyKind parse_policy(std::string_view name) {
  const std::string n = lower_case(name);
  if (n == "mmse") return PolicyKind::MMSE;
  if (n == "mape") return PolicyKind::MAPE;
  if (n == "mmae") return PolicyKind::MMAE;
  throw InvalidArgument("unknown policy '" + std::string(name) + "' (expected mmse, mape or mmae)");
}

struct FantasyPolicy {
  PolicyKind kind = PolicyKind::MMSE;
  int quad_points = 3;
  int mmae_samples = 15;

  void validate() const {
    if (quad_points != 3) throw InvalidArgument("only 3-point quadrature is supported");
    if (mmae_samples < 3 || mmae_samples % 2 == 0)
      throw InvalidArgument("mmae_samples must be odd and >= 3");
  }
};

struct QuadNode {
  double y;
  double weight;
};

/// 3-point Gauss-Legendre rule on [mu - 3 sigma, mu + 3 sigma].
inline std::vector<QuadNode> quad_nodes(double mu, double sigma) {
  if (!(sigma >= 0.0)) throw InvalidArgument("quad_nodes: sigma must be >= 0");
  if (sigma == 0.0) return {{mu, 1.0}};
  const double t = std::sqrt(0.6);
  const double h = 3.0 * sigma;
  return {{mu - h * t, h * 5.0 / 9.0}, {mu, h * 8.0 / 9.0}, {mu + h * t, h * 5.0 / 9.0}};
}

/// Everything a strategy needs besides the model.
struct ScoreEnv {
  StrategyKind strategy = StrategyKind::U;
  const Vector* densities = nullptr;
  int dim = 0;
  ScreeningOptions screening;
};

/// Scores of one model over the pool, plus the quantities they are built from.
struct Evaluation {
  Predictions preds;
  // Combinable parts of the score: {S, sigma_b^2} for OPT_WCO, {score} otherwise.
  std::vector<Vector> components;
  Vector score;
  // Indicator-covariance row sums (OPT_WCO only).
  Vector row_sums;
};

inline Vector finalize(StrategyKind k, const std::vector<Vector>& comps) {
  if (k == StrategyKind::OPT_WCO) return wco_from_rows(comps[0], comps[1]);
  return comps[0];
}

inline Vector raw_scores(const ScoreEnv& env, const Predictions& p) {
  auto need_density = [&] {
    if (!env.densities) throw InvalidArgument("strategy needs the pool densities");
    return *env.densities;
  };
  switch (env.strategy) {
    case StrategyKind::U: return score_u(p);
    case StrategyKind::EFF: return score_eff(p);
    case StrategyKind::H: return score_h(p);
    case StrategyKind::LIF: return score_lif(p, need_density(), env.dim);
    case StrategyKind::REIF: return score_reif(p);
    case StrategyKind::REIF2: return score_reif2(p, need_density());
    case StrategyKind::FNEIF: return score_fneif(p);
    case StrategyKind::OPT_NCO: return score_opt_nco(p);
    case StrategyKind::OPT_WCO: break;
  }
  throw InvalidArgument("raw_scores: OPT_WCO needs the indicator field");
}

inline Evaluation evaluate(const ScoreEnv& env, const KrigingModel& model, const PoolProjection& proj) {
  Evaluation ev;
  ev.preds = proj.predictions(model);
  if (env.strategy == StrategyKind::OPT_WCO) {
    BernoulliField field(model, proj, ev.preds, env.screening);
    ev.row_sums = field.row_sums();
    ev.components = {ev.row_sums, field.sigma_b2_values()};
  } else {
    ev.components = {raw_scores(env, ev.preds)};
  }
  ev.score = finalize(env.strategy, ev.components);
  return ev;
}

struct FantasyResult {
  Vector score;
  // Model and projection with the pick fixed at its predicted mean, used as
  // the base for the following pick.
  KrigingModel believer;
  PoolProjection believer_proj;
  double believer_response = 0.0;
};

/// Scores after enriching pool point `star` with an unknown response,
/// integrated over its predictive distribution according to `policy`.
inline FantasyResult fantasy_score(const ScoreEnv& env, const KrigingModel& model,
                                   const PoolProjection& proj, Eigen::Index star,
                                   const FantasyPolicy& policy, Rng& rng) {
  const auto x = proj.pool().row(star).transpose();
  const MarginalPrediction p =
      model.from_projection(proj.vw()[star], proj.vv()[star], proj.vq()[star]);
  const double mu = p.mean;
  const double sd = p.sd();

  FantasyResult fr{Vector(), model.refit_with(Vector(x), mu, false), PoolProjection(), mu};
  fr.believer_proj = proj.extend(fr.believer);

  auto components_at = [&](double y) {
    const KrigingModel k = model.refit_with(Vector(x), y, false);
    return evaluate(env, k, proj.extend(k)).components;
  };

  std::vector<Vector> comps;
  if (policy.kind == PolicyKind::MAPE || sd == 0.0) {
    comps = evaluate(env, fr.believer, fr.believer_proj).components;
  } else if (policy.kind == PolicyKind::MMSE) {
    const auto nodes = quad_nodes(mu, sd);
    double wsum = 0.0;
    for (const QuadNode& nd : nodes) {
      const double w = nd.weight * norm_pdf((nd.y - mu) / sd) / sd;
      const auto c = nd.y == mu ? evaluate(env, fr.believer, fr.believer_proj).components : components_at(nd.y);
      if (comps.empty()) {
        comps = c;
        for (auto& v : comps) v *= w;
      } else {
        for (std::size_t j = 0; j < comps.size(); ++j) comps[j] += w * c[j];
      }
      wsum += w;
    }
    for (auto& v : comps) v /= wsum;
  } else {
    policy.validate();
    std::vector<std::vector<Vector>> draws;
    for (int s = 0; s < policy.mmae_samples; ++s) draws.push_back(components_at(mu + sd * rng.normal()));
    comps = draws[0];
    std::vector<double> buf(draws.size());
    const std::size_t mid = draws.size() / 2;
    for (std::size_t j = 0; j < comps.size(); ++j)
      for (Eigen::Index i = 0; i < comps[j].size(); ++i) {
        for (std::size_t s = 0; s < draws.size(); ++s) buf[s] = draws[s][j][i];
        std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid), buf.end());
        comps[j][i] = buf[mid];
      }
  }
  fr.score = finalize(env.strategy, comps);
  return fr;
}

struct EnrichmentBatch {
  std::vector<std::size_t> indices;
  RowMatrix points;
  // Hypothesized responses of the picks that were followed by another pick.
  std::vector<double> fantasies;
  std::vector<double> scores;
  std::size_t n_para() const { return indices.size(); }
};

inline constexpr double kExclusionRadius = 1e-10;

/// Marks every pool point within the exclusion radius of x.
template <class Point>
void exclude_near(const RowMatrix& pool, const Point& x, std::vector<bool>& excluded) {
  for (Eigen::Index i = 0; i < pool.rows(); ++i)
    if (!excluded[static_cast<std::size_t>(i)] && (pool.row(i) - x).norm() <= kExclusionRadius)
      excluded[static_cast<std::size_t>(i)] = true;
}

/// Sequential batch: pick, fantasize, refit at fixed theta, pick again.
/// `base` is the evaluation of `model` on `proj`.
inline EnrichmentBatch select_batch(const ScoreEnv& env, const KrigingModel& model,
                                    const PoolProjection& proj, const Evaluation& base,
                                    std::size_t n_para, const FantasyPolicy& policy,
                                    std::vector<bool> excluded, Rng& rng) {
  if (n_para < 1) throw InvalidArgument("select_batch: n_para must be >= 1");
  const RowMatrix& pool = proj.pool();
  excluded.resize(static_cast<std::size_t>(pool.rows()), false);
  const std::size_t free_count =
      static_cast<std::size_t>(std::count(excluded.begin(), excluded.end(), false));
  if (free_count < n_para) throw InvalidArgument("select_batch: not enough candidates left in the pool");
  const SelectionRule rule = rule_of(env.strategy);

  EnrichmentBatch batch;
  batch.points.resize(static_cast<Eigen::Index>(n_para), pool.cols());
  std::size_t pick = select(base.score, rule, excluded);
  batch.scores.push_back(base.score[static_cast<Eigen::Index>(pick)]);

  KrigingModel cur = model;
  PoolProjection cur_proj = proj;
  for (std::size_t t = 0;; ++t) {
    batch.indices.push_back(pick);
    batch.points.row(static_cast<Eigen::Index>(t)) = pool.row(static_cast<Eigen::Index>(pick));
    exclude_near(pool, pool.row(static_cast<Eigen::Index>(pick)), excluded);
    if (t + 1 == n_para) break;
    FantasyResult fr = fantasy_score(env, cur, cur_proj, static_cast<Eigen::Index>(pick), policy, rng);
    batch.fantasies.push_back(fr.believer_response);
    pick = select(fr.score, rule, excluded);
    batch.scores.push_back(fr.score[static_cast<Eigen::Index>(pick)]);
    cur = std::move(fr.believer);
    cur_proj = std::move(fr.believer_proj);
  }
  return batch;
}

}  // namespace akrel
