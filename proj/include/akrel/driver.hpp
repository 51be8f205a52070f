#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "akrel/bench.hpp"
#include "akrel/bernoulli.hpp"
#include "akrel/enrich.hpp"
#include "akrel/error.hpp"
#include "akrel/estimator.hpp"
#include "akrel/kriging.hpp"
#include "akrel/learning.hpp"
#include "akrel/rng.hpp"
#include "akrel/rv_model.hpp"

namespace akrel {

struct LimitStateConfig {
  LimitState::Kind kind = LimitState::Kind::rastrigin;
  double beta = 2.0;
  std::string command;
  std::size_t dimension = 0;
  double timeout_s = 300.0;

  std::size_t dim() const {
    switch (kind) {
      case LimitState::Kind::rastrigin: return 2;
      case LimitState::Kind::linear_gaussian: return 1;
      case LimitState::Kind::external: return dimension;
    }
    return 0;
  }

  LimitState make() const {
    switch (kind) {
      case LimitState::Kind::rastrigin: return LimitState::make_rastrigin();
      case LimitState::Kind::linear_gaussian: return LimitState::make_linear_gaussian(beta);
      case LimitState::Kind::external: break;
    }
    return LimitState::make_external(command, dimension, timeout_s);
  }
};

enum class VarianceModel { automatic, mi, mc };

struct StopConfig {
  double threshold = 1e-3;
  bool classic = false;
  VarianceModel variance_model = VarianceModel::automatic;
};

struct RunConfig {
  LimitStateConfig limit_state;
  // Empty means independent standard normals in the limit-state dimension.
  std::vector<Marginal> random_variables;
  std::size_t pool_size = 10000;
  SamplePool::Origin sampling = SamplePool::Origin::lhs;
  std::size_t initial_doe = 12;
  StrategyKind strategy = StrategyKind::U;
  FantasyPolicy policy;
  std::size_t n_para = 1;
  StopConfig stop;
  MleOptions mle;
  // Full multi-start likelihood search every this many iterations; warm
  // started single searches in between. 1 searches fully every time.
  std::size_t mle_full_every = 10;
  ScreeningOptions screening;
  // 0 means ceil(2000 / n_para).
  std::size_t max_iterations = 0;
  std::uint64_t seed = 1;
  std::optional<double> reference_pf;
  // Classify the pool with the true limit state (built-in kinds only, not
  // counted as calls) and report the error against that estimate too.
  bool pool_reference = true;
  std::vector<double> grid_lower;
  std::vector<double> grid_upper;

  RandomVariableSpec rv_spec() const {
    if (random_variables.empty()) return RandomVariableSpec::standard_normal(limit_state.dim());
    return RandomVariableSpec(random_variables);
  }

  std::size_t iteration_cap() const {
    return max_iterations ? max_iterations : (2000 + n_para - 1) / n_para;
  }

  CorrelationMode correlation_mode() const {
    if (stop.variance_model == VarianceModel::mi) return CorrelationMode::mi;
    if (stop.variance_model == VarianceModel::mc) return CorrelationMode::mc;
    return strategy == StrategyKind::OPT_WCO ? CorrelationMode::mc : CorrelationMode::mi;
  }

  void validate() const {
    if (limit_state.dim() < 1) throw InvalidArgument("limit state dimension must be >= 1");
    if (limit_state.kind == LimitState::Kind::external && limit_state.command.empty())
      throw InvalidArgument("external limit state needs a command");
    if (!random_variables.empty() && random_variables.size() != limit_state.dim())
      throw InvalidArgument("random_variables must have one entry per limit-state input");
    rv_spec().validate();
    if (pool_size < 1 || initial_doe < 2 || n_para < 1)
      throw InvalidArgument("pool size >= 1, initial DoE >= 2 and n_para >= 1 required");
    if (initial_doe > pool_size) throw InvalidArgument("initial DoE larger than the pool");
    if (!(stop.threshold > 0.0)) throw InvalidArgument("stop threshold must be > 0");
    if (mle_full_every < 1) throw InvalidArgument("mle_full_every must be >= 1");
    policy.validate();
  }
};

enum class StopCause { estimator_cov, classic_criterion, max_iterations };

inline std::string_view to_string(StopCause c) {
  switch (c) {
    case StopCause::estimator_cov: return "estimator_cov";
    case StopCause::classic_criterion: return "classic_criterion";
    case StopCause::max_iterations: return "max_iterations";
  }
  return "?";
}

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t n_call = 0;
  EstimatorStats stats;
  std::vector<std::size_t> selected;
  RowMatrix points;
  std::vector<double> scores;
  std::vector<double> responses;
  Vector theta;
  double wall_time = 0.0;
};

struct RunReport {
  std::vector<IterationRecord> records;
  double final_pf = 0.0;
  double final_variance = 0.0;
  StopCause cause = StopCause::max_iterations;
  std::size_t n_call = 0;
  std::size_t iterations = 0;
  std::size_t initial_doe = 0;
  std::optional<double> reference_pf;
  std::optional<double> eps;
  std::optional<double> pool_pf;
  std::optional<double> eps_pool;
  bool cov_mcs_warning = false;
  std::optional<KrigingModel> model;
  std::vector<std::string> warnings;

  /// Enriched-point sequence, flattened in selection order.
  std::vector<std::size_t> selection_sequence() const {
    std::vector<std::size_t> s;
    for (const auto& r : records) s.insert(s.end(), r.selected.begin(), r.selected.end());
    return s;
  }
};

using ProgressFn = std::function<void(const IterationRecord&)>;

inline SamplePool make_pool(const RunConfig& cfg) {
  const RandomVariableSpec spec = cfg.rv_spec();
  const std::uint64_t s = derive_seed(cfg.seed, static_cast<std::uint64_t>(Stream::pool));
  return cfg.sampling == SamplePool::Origin::lhs ? lhs_sample(spec, cfg.pool_size, s)
                                                 : mc_sample(spec, cfg.pool_size, s);
}

/// Adaptive Kriging Monte Carlo loop with batch enrichment.
inline RunReport run(const RunConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  LimitState ls = cfg.limit_state.make();
  const RandomVariableSpec spec = cfg.rv_spec();
  const SamplePool pool = make_pool(cfg);
  const RowMatrix& pts = pool.points;
  const std::size_t n = pool.size();

  Vector densities;
  ScoreEnv env;
  env.strategy = cfg.strategy;
  env.dim = static_cast<int>(spec.dim());
  env.screening = cfg.screening;
  if (cfg.strategy == StrategyKind::LIF || cfg.strategy == StrategyKind::REIF2) {
    densities = joint_pdf(spec, pts);
    env.densities = &densities;
  }
  const CorrelationMode cmode = cfg.correlation_mode();

  // Initial design: a seeded random subset of the pool.
  Rng doe_rng(cfg.seed, Stream::doe);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < cfg.initial_doe; ++i) std::swap(order[i], order[i + doe_rng.below(n - i)]);
  DesignOfExperiment doe;
  doe.points.resize(static_cast<Eigen::Index>(cfg.initial_doe), pts.cols());
  std::vector<bool> excluded(n, false);
  for (std::size_t i = 0; i < cfg.initial_doe; ++i) {
    doe.points.row(static_cast<Eigen::Index>(i)) = pts.row(static_cast<Eigen::Index>(order[i]));
    excluded[order[i]] = true;
  }
  for (std::size_t i = 0; i < cfg.initial_doe; ++i) exclude_near(pts, doe.points.row(static_cast<Eigen::Index>(i)), excluded);
  {
    const auto y = ls.evaluate(doe.points);
    doe.responses = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
  }

  RunReport rep;
  rep.initial_doe = cfg.initial_doe;
  Rng fantasy_rng(cfg.seed, Stream::mmae);
  KrigingModel model = KrigingModel::fit(doe, cfg.mle);
  const std::size_t cap = cfg.iteration_cap();

  for (std::size_t it = 0;; ++it) {
    const PoolProjection proj(model, pts);
    const Evaluation ev = evaluate(env, model, proj);
    const double pf = pf_probabilistic(ev.preds);
    double variance;
    if (cmode == CorrelationMode::mi) {
      variance = var_mi(ev.preds);
    } else if (ev.row_sums.size()) {
      variance = var_mc_from_rows(ev.row_sums);
    } else {
      variance = var_mc(BernoulliField(model, proj, ev.preds, cfg.screening));
    }

    IterationRecord rec;
    rec.iteration = it;
    rec.n_call = ls.calls();
    rec.stats = make_stats(pf, variance, n, ClassificationMode::probabilistic, cmode);
    rec.theta = model.theta();

    bool stop = false;
    if (cfg.stop.classic && has_classic_stop(cfg.strategy)) {
      if (classic_stop(cfg.strategy, ev.score, excluded)) {
        stop = true;
        rep.cause = StopCause::classic_criterion;
      }
    } else if (stop_check(pf, variance, cfg.stop.threshold)) {
      stop = true;
      rep.cause = StopCause::estimator_cov;
    }
    if (!stop && it >= cap) {
      stop = true;
      rep.cause = StopCause::max_iterations;
    }
    if (stop) {
      rec.wall_time = std::chrono::duration<double>(clock::now() - t0).count();
      if (progress) progress(rec);
      rep.records.push_back(std::move(rec));
      rep.final_pf = pf;
      rep.final_variance = variance;
      rep.iterations = it;
      break;
    }

    const EnrichmentBatch batch = select_batch(env, model, proj, ev, cfg.n_para, cfg.policy, excluded, fantasy_rng);
    const auto ys = ls.evaluate(batch.points);
    rec.selected = batch.indices;
    rec.points = batch.points;
    rec.scores = batch.scores;
    rec.responses = ys;
    for (std::size_t k = 0; k < batch.indices.size(); ++k) {
      excluded[batch.indices[k]] = true;
      exclude_near(pts, batch.points.row(static_cast<Eigen::Index>(k)), excluded);
    }

    const Eigen::Index m = doe.points.rows();
    const Eigen::Index add = batch.points.rows();
    doe.points.conservativeResize(m + add, Eigen::NoChange);
    doe.points.bottomRows(add) = batch.points;
    doe.responses.conservativeResize(m + add);
    for (Eigen::Index k = 0; k < add; ++k) doe.responses[m + k] = ys[static_cast<std::size_t>(k)];

    rec.wall_time = std::chrono::duration<double>(clock::now() - t0).count();
    if (progress) progress(rec);
    rep.records.push_back(std::move(rec));

    if ((it + 1) % cfg.mle_full_every == 0)
      model = KrigingModel::fit(doe, cfg.mle);
    else
      model = KrigingModel::fit_warm(doe, model.theta(), cfg.mle);
  }

  rep.n_call = ls.calls();
  ls.close();
  rep.cov_mcs_warning = rep.records.back().stats.cov_mcs_warning;
  if (rep.cov_mcs_warning)
    rep.warnings.push_back("pool coefficient of variation exceeds 0.05; consider a larger pool");
  if (rep.cause == StopCause::max_iterations) rep.warnings.push_back("stopped at the iteration cap");
  if (cfg.reference_pf) {
    rep.reference_pf = *cfg.reference_pf;
    if (*cfg.reference_pf > 0.0) rep.eps = std::abs(*cfg.reference_pf - rep.final_pf) / *cfg.reference_pf;
  }
  if (cfg.pool_reference && cfg.limit_state.kind != LimitState::Kind::external) {
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) k += ls.exact(pts.row(i)) <= 0.0;
    rep.pool_pf = static_cast<double>(k) / static_cast<double>(n);
    if (*rep.pool_pf > 0.0) rep.eps_pool = std::abs(*rep.pool_pf - rep.final_pf) / *rep.pool_pf;
  }
  rep.model = std::move(model);
  return rep;
}

struct ComparisonRow {
  StrategyKind strategy = StrategyKind::U;
  double mean_n_call = 0.0;
  double cov_n_call = 0.0;
  double mean_eps = 0.0;
  double cov_eps = 0.0;
  std::size_t runs = 0;
  std::size_t failures = 0;
  std::vector<RunReport> reports;
};

/// Mean and population coefficient of variation.
inline std::pair<double, double> mean_cov(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  if (sd == 0.0) return {mean, 0.0};
  return {mean, sd / mean};
}

/// Seed of replication r of a comparison; identical across strategies so
/// that runs are paired.
inline std::uint64_t replication_seed(std::uint64_t base, std::size_t r) {
  return derive_seed(base, static_cast<std::uint64_t>(Stream::replication) * 0x10000ULL + r);
}

/// Runs every strategy `replications` times with paired seeds. Each cell
/// reports the mean and coefficient of variation of N_call and of the
/// relative error (against reference_pf when given, else the pool estimate).
inline std::vector<ComparisonRow> compare(const RunConfig& base, const std::vector<StrategyKind>& strategies,
                                          std::size_t replications, bool keep_reports = false,
                                          const std::function<void(StrategyKind, std::size_t, const RunReport*,
                                                                   const std::string&)>& on_run = {}) {
  if (replications < 1) throw InvalidArgument("compare: replications must be >= 1");
  std::vector<ComparisonRow> rows;
  for (StrategyKind s : strategies) {
    ComparisonRow row;
    row.strategy = s;
    std::vector<double> calls, eps;
    for (std::size_t r = 0; r < replications; ++r) {
      RunConfig cfg = base;
      cfg.strategy = s;
      cfg.seed = replication_seed(base.seed, r);
      try {
        RunReport rep = run(cfg);
        calls.push_back(static_cast<double>(rep.n_call));
        if (rep.eps)
          eps.push_back(*rep.eps);
        else if (rep.eps_pool)
          eps.push_back(*rep.eps_pool);
        ++row.runs;
        if (on_run) on_run(s, r, &rep, "");
        if (keep_reports) {
          rep.model.reset();
          row.reports.push_back(std::move(rep));
        }
      } catch (const Error& e) {
        ++row.failures;
        if (on_run) on_run(s, r, nullptr, e.what());
      }
    }
    std::tie(row.mean_n_call, row.cov_n_call) = mean_cov(calls);
    std::tie(row.mean_eps, row.cov_eps) = mean_cov(eps);
    rows.push_back(std::move(row));
  }
  return rows;
}

struct GridRecord {
  double x1, x2, mu, sigma, sigma_b2;
};

/// Predictions on a resolution x resolution grid over [lower, upper],
/// x1 varying fastest.
inline std::vector<GridRecord> grid_dump(const KrigingModel& model, const std::vector<double>& lower,
                                         const std::vector<double>& upper, std::size_t resolution) {
  if (model.dim() != 2) throw InvalidArgument("grid_dump: only 2-dimensional models can be gridded");
  if (resolution < 2) throw InvalidArgument("grid_dump: resolution must be >= 2");
  if (lower.size() != 2 || upper.size() != 2) throw InvalidArgument("grid_dump: bounds must have 2 entries");
  RowMatrix g(static_cast<Eigen::Index>(resolution * resolution), 2);
  auto coord = [&](int d, std::size_t i) {
    if (i == 0) return lower[static_cast<std::size_t>(d)];
    if (i + 1 == resolution) return upper[static_cast<std::size_t>(d)];
    return lower[static_cast<std::size_t>(d)] +
           (upper[static_cast<std::size_t>(d)] - lower[static_cast<std::size_t>(d)]) * static_cast<double>(i) /
               static_cast<double>(resolution - 1);
  };
  for (std::size_t r = 0; r < resolution; ++r)
    for (std::size_t c = 0; c < resolution; ++c) {
      const auto k = static_cast<Eigen::Index>(r * resolution + c);
      g(k, 0) = coord(0, c);
      g(k, 1) = coord(1, r);
    }
  const auto preds = model.predict_marginal(g);
  std::vector<GridRecord> out;
  out.reserve(preds.size());
  for (std::size_t k = 0; k < preds.size(); ++k)
    out.push_back({g(static_cast<Eigen::Index>(k), 0), g(static_cast<Eigen::Index>(k), 1), preds[k].mean,
                   preds[k].sd(), sigma_b2(preds[k])});
  return out;
}

}  // namespace akrel
