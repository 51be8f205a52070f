#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "akrel/driver.hpp"
#include "akrel/error.hpp"

namespace akrel {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Round-trip decimal form of a double.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

/// 1-based line of the first occurrence of "key" in the document, or 0.
inline std::size_t line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class ConfigReader {
 public:
  explicit ConfigReader(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    const auto key = path.substr(path.find_last_of('.') + 1);
    const std::size_t line = line_of_key(text_, key);
    throw ConfigError((line ? "line " + std::to_string(line) + ": " : std::string()) + "'" + path + "': " + msg);
  }

  void only(const json& obj, const std::string& path, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(path, "expected an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!allowed.count(it.key())) fail(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
  }

  double number(const json& j, const std::string& path) const {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
  }

  std::size_t count(const json& j, const std::string& path) const {
    if (!j.is_number_integer() || j.get<long long>() < 0) fail(path, "expected a non-negative integer");
    return static_cast<std::size_t>(j.get<long long>());
  }

  std::string string(const json& j, const std::string& path) const {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
  }

  bool boolean(const json& j, const std::string& path) const {
    if (!j.is_boolean()) fail(path, "expected true or false");
    return j.get<bool>();
  }

  std::vector<double> numbers(const json& j, const std::string& path) const {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> v;
    for (const auto& e : j) v.push_back(number(e, path));
    return v;
  }

 private:
  const std::string& text_;
};

}  // namespace detail

/// Parses a run configuration document. Unknown keys are rejected and
/// missing keys keep their defaults.
inline RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = e.byte;
    const std::size_t line =
        1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(std::min(byte, text.size())), '\n'));
    throw ConfigError("line " + std::to_string(line) + ": invalid JSON: " + e.what());
  }
  detail::ConfigReader rd(text);
  rd.only(doc, "", {"schema_version", "limit_state", "random_variables", "pool", "initial_doe", "strategy", "policy",
                    "n_para", "stop", "kriging", "screening", "max_iterations", "seed", "reference_pf",
                    "pool_reference", "grid"});
  RunConfig cfg;
  if (doc.contains("schema_version") && rd.count(doc["schema_version"], "schema_version") != kSchemaVersion)
    rd.fail("schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");

  if (doc.contains("limit_state")) {
    const json& ls = doc["limit_state"];
    rd.only(ls, "limit_state", {"kind", "beta", "command", "dimension", "timeout_s"});
    if (ls.contains("kind")) {
      const std::string k = lower_case(rd.string(ls["kind"], "limit_state.kind"));
      if (k == "rastrigin") cfg.limit_state.kind = LimitState::Kind::rastrigin;
      else if (k == "linear_gaussian") cfg.limit_state.kind = LimitState::Kind::linear_gaussian;
      else if (k == "external") cfg.limit_state.kind = LimitState::Kind::external;
      else rd.fail("limit_state.kind", "expected rastrigin, linear_gaussian or external");
    }
    if (ls.contains("beta")) cfg.limit_state.beta = rd.number(ls["beta"], "limit_state.beta");
    if (ls.contains("command")) cfg.limit_state.command = rd.string(ls["command"], "limit_state.command");
    if (ls.contains("dimension")) cfg.limit_state.dimension = rd.count(ls["dimension"], "limit_state.dimension");
    if (ls.contains("timeout_s")) cfg.limit_state.timeout_s = rd.number(ls["timeout_s"], "limit_state.timeout_s");
    if (cfg.limit_state.kind == LimitState::Kind::external) {
      if (cfg.limit_state.command.empty()) rd.fail("limit_state.command", "required for external limit states");
      if (cfg.limit_state.dimension < 1) rd.fail("limit_state.dimension", "required for external limit states");
    }
  }

  if (doc.contains("random_variables")) {
    const json& rv = doc["random_variables"];
    if (!rv.is_array()) rd.fail("random_variables", "expected an array");
    for (const auto& e : rv) {
      rd.only(e, "random_variables", {"kind", "mean", "std"});
      Marginal m;
      const std::string k = e.contains("kind") ? lower_case(rd.string(e["kind"], "random_variables.kind")) : "normal";
      if (k == "standard_normal") {
        m = Marginal::standard();
        if (e.contains("mean") || e.contains("std"))
          rd.fail("random_variables.kind", "standard_normal takes no mean or std");
      } else if (k == "normal") {
        m = Marginal::gaussian(e.contains("mean") ? rd.number(e["mean"], "random_variables.mean") : 0.0,
                               e.contains("std") ? rd.number(e["std"], "random_variables.std") : 1.0);
        if (!(m.std > 0.0)) rd.fail("random_variables.std", "must be > 0");
      } else {
        rd.fail("random_variables.kind", "expected standard_normal or normal");
      }
      cfg.random_variables.push_back(m);
    }
  }

  if (doc.contains("pool")) {
    const json& p = doc["pool"];
    rd.only(p, "pool", {"size", "sampling"});
    if (p.contains("size")) cfg.pool_size = rd.count(p["size"], "pool.size");
    if (p.contains("sampling")) {
      const std::string s = lower_case(rd.string(p["sampling"], "pool.sampling"));
      if (s == "lhs") cfg.sampling = SamplePool::Origin::lhs;
      else if (s == "mc") cfg.sampling = SamplePool::Origin::monte_carlo;
      else rd.fail("pool.sampling", "expected lhs or mc");
    }
  }
  if (doc.contains("initial_doe")) cfg.initial_doe = rd.count(doc["initial_doe"], "initial_doe");
  if (doc.contains("strategy")) {
    try {
      cfg.strategy = parse_strategy(rd.string(doc["strategy"], "strategy"));
    } catch (const InvalidArgument& e) {
      rd.fail("strategy", e.what());
    }
  }
  if (doc.contains("policy")) {
    const json& p = doc["policy"];
    rd.only(p, "policy", {"kind", "mmae_samples", "quad_points"});
    if (p.contains("kind")) {
      try {
        cfg.policy.kind = parse_policy(rd.string(p["kind"], "policy.kind"));
      } catch (const InvalidArgument& e) {
        rd.fail("policy.kind", e.what());
      }
    }
    if (p.contains("mmae_samples")) cfg.policy.mmae_samples = static_cast<int>(rd.count(p["mmae_samples"], "policy.mmae_samples"));
    if (p.contains("quad_points")) cfg.policy.quad_points = static_cast<int>(rd.count(p["quad_points"], "policy.quad_points"));
  }
  if (doc.contains("n_para")) cfg.n_para = rd.count(doc["n_para"], "n_para");
  if (doc.contains("stop")) {
    const json& s = doc["stop"];
    rd.only(s, "stop", {"threshold", "classic", "variance_model"});
    if (s.contains("threshold")) cfg.stop.threshold = rd.number(s["threshold"], "stop.threshold");
    if (s.contains("classic")) cfg.stop.classic = rd.boolean(s["classic"], "stop.classic");
    if (s.contains("variance_model")) {
      const std::string v = lower_case(rd.string(s["variance_model"], "stop.variance_model"));
      if (v == "auto") cfg.stop.variance_model = VarianceModel::automatic;
      else if (v == "mi") cfg.stop.variance_model = VarianceModel::mi;
      else if (v == "mc") cfg.stop.variance_model = VarianceModel::mc;
      else rd.fail("stop.variance_model", "expected auto, mi or mc");
    }
  }
  if (doc.contains("kriging")) {
    const json& k = doc["kriging"];
    rd.only(k, "kriging", {"theta_lower", "theta_upper", "starts", "max_evals", "tol", "full_search_every", "warm_step"});
    if (k.contains("theta_lower")) cfg.mle.bounds.lower = rd.number(k["theta_lower"], "kriging.theta_lower");
    if (k.contains("theta_upper")) cfg.mle.bounds.upper = rd.number(k["theta_upper"], "kriging.theta_upper");
    if (k.contains("starts")) cfg.mle.n_starts = static_cast<int>(rd.count(k["starts"], "kriging.starts"));
    if (k.contains("max_evals")) cfg.mle.max_evals = static_cast<int>(rd.count(k["max_evals"], "kriging.max_evals"));
    if (k.contains("tol")) cfg.mle.tol = rd.number(k["tol"], "kriging.tol");
    if (k.contains("full_search_every")) cfg.mle_full_every = rd.count(k["full_search_every"], "kriging.full_search_every");
    if (k.contains("warm_step")) cfg.mle.warm_step = rd.number(k["warm_step"], "kriging.warm_step");
    if (!(cfg.mle.bounds.lower > 0.0) || !(cfg.mle.bounds.upper >= cfg.mle.bounds.lower))
      rd.fail("kriging.theta_lower", "bounds must satisfy 0 < theta_lower <= theta_upper");
    if (cfg.mle.n_starts < 1) rd.fail("kriging.starts", "must be >= 1");
  }
  if (doc.contains("screening")) {
    const json& s = doc["screening"];
    rd.only(s, "screening", {"r_min", "pair_tolerance", "exact_limit"});
    if (s.contains("r_min")) cfg.screening.r_min = rd.number(s["r_min"], "screening.r_min");
    if (s.contains("pair_tolerance")) cfg.screening.pair_tolerance = rd.number(s["pair_tolerance"], "screening.pair_tolerance");
    if (s.contains("exact_limit")) cfg.screening.exact_limit = rd.count(s["exact_limit"], "screening.exact_limit");
  }
  if (doc.contains("max_iterations")) cfg.max_iterations = rd.count(doc["max_iterations"], "max_iterations");
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !(doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0))
      rd.fail("seed", "expected a non-negative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("reference_pf") && !doc["reference_pf"].is_null())
    cfg.reference_pf = rd.number(doc["reference_pf"], "reference_pf");
  if (doc.contains("pool_reference")) cfg.pool_reference = rd.boolean(doc["pool_reference"], "pool_reference");
  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    rd.only(g, "grid", {"lower", "upper"});
    if (g.contains("lower")) cfg.grid_lower = rd.numbers(g["lower"], "grid.lower");
    if (g.contains("upper")) cfg.grid_upper = rd.numbers(g["upper"], "grid.upper");
  }
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunConfig load_config(const std::filesystem::path& p) {
  try {
    return parse_config(read_file(p));
  } catch (const ConfigError& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

/// Normalized configuration, as echoed into summary.json.
inline json config_to_json(const RunConfig& c) {
  json ls = {{"kind", c.limit_state.kind == LimitState::Kind::rastrigin         ? "rastrigin"
                      : c.limit_state.kind == LimitState::Kind::linear_gaussian ? "linear_gaussian"
                                                                                : "external"}};
  if (c.limit_state.kind == LimitState::Kind::linear_gaussian) ls["beta"] = c.limit_state.beta;
  if (c.limit_state.kind == LimitState::Kind::external) {
    ls["command"] = c.limit_state.command;
    ls["dimension"] = c.limit_state.dimension;
    ls["timeout_s"] = c.limit_state.timeout_s;
  }
  json rv = json::array();
  const RandomVariableSpec spec = c.rv_spec();
  for (const auto& m : spec.marginals())
    rv.push_back(m.kind == Marginal::Kind::standard_normal ? json{{"kind", "standard_normal"}}
                                                           : json{{"kind", "normal"}, {"mean", m.mean}, {"std", m.std}});
  json j = {
      {"schema_version", kSchemaVersion},
      {"limit_state", ls},
      {"random_variables", rv},
      {"pool", {{"size", c.pool_size}, {"sampling", c.sampling == SamplePool::Origin::lhs ? "lhs" : "mc"}}},
      {"initial_doe", c.initial_doe},
      {"strategy", to_string(c.strategy)},
      {"policy", {{"kind", to_string(c.policy.kind)}, {"mmae_samples", c.policy.mmae_samples}, {"quad_points", c.policy.quad_points}}},
      {"n_para", c.n_para},
      {"stop",
       {{"threshold", c.stop.threshold},
        {"classic", c.stop.classic},
        {"variance_model", c.stop.variance_model == VarianceModel::automatic ? "auto"
                           : c.stop.variance_model == VarianceModel::mi      ? "mi"
                                                                             : "mc"}}},
      {"kriging",
       {{"theta_lower", c.mle.bounds.lower},
        {"theta_upper", c.mle.bounds.upper},
        {"starts", c.mle.n_starts},
        {"max_evals", c.mle.max_evals},
        {"tol", c.mle.tol},
        {"full_search_every", c.mle_full_every},
        {"warm_step", c.mle.warm_step}}},
      {"screening",
       {{"r_min", c.screening.r_min}, {"pair_tolerance", c.screening.pair_tolerance}, {"exact_limit", c.screening.exact_limit}}},
      {"max_iterations", c.iteration_cap()},
      {"seed", c.seed},
      {"pool_reference", c.pool_reference},
  };
  j["reference_pf"] = c.reference_pf ? json(*c.reference_pf) : json(nullptr);
  if (!c.grid_lower.empty()) j["grid"]["lower"] = c.grid_lower;
  if (!c.grid_upper.empty()) j["grid"]["upper"] = c.grid_upper;
  return j;
}

inline const char* kHistoryHeader =
    "iteration,n_call,pf_hat,variance,cov_estimator,cov_mcs,cov_mcs_warning,theta,selected,points,scores,responses";

/// One row per iteration; list-valued cells separate entries by ';' and
/// point coordinates by ' '.
inline void write_history(std::ostream& os, const RunReport& rep) {
  os << kHistoryHeader << '\n';
  auto list = [](const auto& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ';';
      if constexpr (std::is_floating_point_v<std::decay_t<decltype(v[0])>>)
        s += fmt(v[i]);
      else
        s += std::to_string(v[i]);
    }
    return s;
  };
  for (const auto& r : rep.records) {
    std::string th;
    for (Eigen::Index i = 0; i < r.theta.size(); ++i) th += (i ? ";" : "") + fmt(r.theta[i]);
    std::string pts;
    for (Eigen::Index i = 0; i < r.points.rows(); ++i) {
      if (i) pts += ';';
      for (Eigen::Index j = 0; j < r.points.cols(); ++j) pts += (j ? " " : "") + fmt(r.points(i, j));
    }
    os << r.iteration << ',' << r.n_call << ',' << fmt(r.stats.pf_hat) << ',' << fmt(r.stats.variance) << ','
       << fmt(r.stats.cov_estimator) << ',' << fmt(r.stats.cov_mcs) << ',' << (r.stats.cov_mcs_warning ? 1 : 0) << ','
       << th << ',' << list(r.selected) << ',' << pts << ',' << list(r.scores) << ',' << list(r.responses) << '\n';
  }
}

inline json summary_json(const RunConfig& cfg, const RunReport& rep) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  const auto& last = rep.records.back().stats;
  json theta = json::array();
  if (rep.model)
    for (Eigen::Index i = 0; i < rep.model->theta().size(); ++i) theta.push_back(rep.model->theta()[i]);
  return json{
      {"config", config_to_json(cfg)},
      {"final_pf", rep.final_pf},
      {"variance", rep.final_variance},
      {"cov_estimator", last.cov_estimator},
      {"cov_mcs", last.cov_mcs},
      {"cov_mcs_warning", rep.cov_mcs_warning},
      {"correlation_mode", last.correlation_mode == CorrelationMode::mi ? "mi" : "mc"},
      {"stop_cause", to_string(rep.cause)},
      {"n_call", rep.n_call},
      {"initial_doe", rep.initial_doe},
      {"iterations", rep.iterations},
      {"reference_pf", opt(rep.reference_pf)},
      {"eps", opt(rep.eps)},
      {"pool_pf", opt(rep.pool_pf)},
      {"eps_pool", opt(rep.eps_pool)},
      {"theta", theta},
      {"warnings", rep.warnings},
  };
}

inline const char* kComparisonHeader = "strategy,mean_n_call,cov_n_call,mean_eps,cov_eps";

inline void write_comparison(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << kComparisonHeader << '\n';
  for (const auto& r : rows)
    os << to_string(r.strategy) << ',' << fmt(r.mean_n_call) << ',' << fmt(r.cov_n_call) << ',' << fmt(r.mean_eps)
       << ',' << fmt(r.cov_eps) << '\n';
}

inline const char* kGridHeader = "x1,x2,mu,sigma,sigma_b2";

inline void write_grid(std::ostream& os, const std::vector<GridRecord>& g) {
  os << kGridHeader << '\n';
  for (const auto& r : g)
    os << fmt(r.x1) << ',' << fmt(r.x2) << ',' << fmt(r.mu) << ',' << fmt(r.sigma) << ',' << fmt(r.sigma_b2) << '\n';
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << s;
  if (!out) throw Error("write failed for '" + p.string() + "'");
}

}  // namespace akrel
