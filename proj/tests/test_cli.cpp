#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "akrel/cli.hpp"

using namespace akrel;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string l;
  while (std::getline(ss, l)) out.push_back(l);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("akrel_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& body, const std::string& name = "cfg.json") {
    const fs::path p = dir_ / name;
    std::ofstream(p) << body;
    return p;
  }

  fs::path small_rastrigin() {
    return write_config(R"({"limit_state": {"kind": "rastrigin"}, "pool": {"size": 1500},
                           "max_iterations": 6, "seed": 2, "reference_pf": 0.0729656})");
  }

  int call(std::vector<std::string> args, std::string* err_out = nullptr) {
    args.insert(args.begin(), "akrel");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    testing::internal::CaptureStderr();
    const int rc = cli::main(static_cast<int>(argv.size()), argv.data());
    const std::string err = testing::internal::GetCapturedStderr();
    if (err_out) *err_out = err;
    return rc;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, MissingConfigExitsOne) {
  std::string err;
  EXPECT_EQ(call({"run", "--config", (dir_ / "nope.json").string(), "--out", (dir_ / "o").string()}, &err), 1);
  EXPECT_NE(err.find("nope.json"), std::string::npos);
  std::ostringstream os;
  EXPECT_EQ(cli::cmd_run(dir_ / "nope.json", {}, dir_ / "o", os), cli::kExitError);
  EXPECT_FALSE(os.str().empty());
}

TEST_F(CliTest, UnknownKeyIsRejectedWithLine) {
  const auto p = write_config("{\n  \"seed\": 1,\n  \"pool\": {\"size\": 100, \"colour\": 3}\n}\n");
  std::ostringstream os;
  EXPECT_EQ(cli::cmd_run(p, {}, dir_ / "o", os), cli::kExitError);
  EXPECT_NE(os.str().find("line 3"), std::string::npos) << os.str();
  EXPECT_NE(os.str().find("pool.colour"), std::string::npos) << os.str();
}

TEST_F(CliTest, MalformedJsonReportsLine) {
  const auto p = write_config("{\n  \"seed\": 1,\n  \"n_para\": ,\n}\n");
  std::ostringstream os;
  EXPECT_EQ(cli::cmd_run(p, {}, dir_ / "o", os), cli::kExitError);
  EXPECT_NE(os.str().find("line 3"), std::string::npos) << os.str();
}

TEST_F(CliTest, DefaultsFollowDocumentedValues) {
  const RunConfig c = parse_config("{}");
  EXPECT_EQ(c.pool_size, 10000u);
  EXPECT_EQ(c.initial_doe, 12u);
  EXPECT_EQ(c.stop.threshold, 1e-3);
  EXPECT_EQ(c.n_para, 1u);
  EXPECT_EQ(c.strategy, StrategyKind::U);
  EXPECT_EQ(c.limit_state.kind, LimitState::Kind::rastrigin);
  EXPECT_THROW(parse_config(R"({"schema_version": 2})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"strategy": "nope"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"n_para": 0})"), ConfigError);
}

TEST_F(CliTest, ShippedConfigsParse) {
  for (const auto& e : fs::directory_iterator(AKREL_CONFIG_DIR))
    if (e.path().extension() == ".json") EXPECT_NO_THROW(load_config(e.path())) << e.path();
}

TEST_F(CliTest, NormalizedConfigRoundTrips) {
  const RunConfig a = load_config(fs::path(AKREL_CONFIG_DIR) / "rastrigin_batch.json");
  const RunConfig b = parse_config(config_to_json(a).dump());
  EXPECT_EQ(config_to_json(a), config_to_json(b));
}

TEST_F(CliTest, SeedOverrideIsDeterministic) {
  const auto cfg = small_rastrigin();
  const auto a = dir_ / "a", b = dir_ / "b";
  EXPECT_EQ(call({"run", "--config", cfg.string(), "--seed", "7", "--out", a.string()}), 2);
  EXPECT_EQ(call({"run", "--config", cfg.string(), "--seed", "7", "--out", b.string()}), 2);
  EXPECT_EQ(slurp(a / "history.csv"), slurp(b / "history.csv"));
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
  const auto s = nlohmann::json::parse(slurp(a / "summary.json"));
  EXPECT_EQ(s["config"]["seed"], 7);
  EXPECT_EQ(s["stop_cause"], "max_iterations");
}

TEST_F(CliTest, HistoryHasOneRowPerIteration) {
  const auto cfg = small_rastrigin();
  EXPECT_EQ(call({"run", "--config", cfg.string(), "--n-para", "2", "--out", dir_.string()}), 2);
  const auto l = lines(slurp(dir_ / "history.csv"));
  ASSERT_EQ(l.size(), 1u + 7u);
  EXPECT_EQ(l[0], "iteration,n_call,pf_hat,variance,cov_estimator,cov_mcs,cov_mcs_warning,theta,selected,points,scores,responses");
  EXPECT_EQ(l[1].substr(0, 5), "0,12,");
  EXPECT_EQ(l[2].substr(0, 5), "1,14,");
  const auto s = nlohmann::json::parse(slurp(dir_ / "summary.json"));
  EXPECT_EQ(s["n_call"], 24);
  EXPECT_EQ(s["iterations"], 6);
}

TEST_F(CliTest, NormalStopExitsZero) {
  const auto cfg = write_config(R"({"limit_state": {"kind": "linear_gaussian", "beta": 2}, "pool": {"size": 3000}})");
  EXPECT_EQ(call({"run", "--config", cfg.string(), "--out", dir_.string()}), 0);
  const auto s = nlohmann::json::parse(slurp(dir_ / "summary.json"));
  EXPECT_EQ(s["stop_cause"], "estimator_cov");
}

TEST_F(CliTest, CsvNumbersRoundTrip) {
  const auto cfg = small_rastrigin();
  call({"run", "--config", cfg.string(), "--out", dir_.string()});
  const auto s = nlohmann::json::parse(slurp(dir_ / "summary.json"));
  const auto l = lines(slurp(dir_ / "history.csv"));
  std::stringstream row(l.back());
  std::string it, nc, pf;
  std::getline(row, it, ',');
  std::getline(row, nc, ',');
  std::getline(row, pf, ',');
  EXPECT_EQ(std::strtod(pf.c_str(), nullptr), s["final_pf"].get<double>());
  EXPECT_EQ(fmt(0.1), "0.10000000000000001");
}

TEST_F(CliTest, CompareHeaderAndIdenticalRows) {
  const auto cfg = small_rastrigin();
  EXPECT_EQ(call({"compare", "--config", cfg.string(), "--strategies", "u,opt_nco", "--replications", "1", "--out",
                  dir_.string()}),
            0);
  const auto l = lines(slurp(dir_ / "comparison.csv"));
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[0], "strategy,mean_n_call,cov_n_call,mean_eps,cov_eps");
  EXPECT_EQ(l[1].substr(l[1].find(',')), l[2].substr(l[2].find(',')));
  EXPECT_EQ(l[1].substr(0, 2), "u,");
  EXPECT_EQ(l[2].substr(0, 8), "opt_nco,");
  // One replication per strategy: the cell equals the single run and its COV is zero.
  EXPECT_NE(l[1].find(",18,0,"), std::string::npos) << l[1];
}

TEST_F(CliTest, GridResolutionAndCorners) {
  const auto cfg = small_rastrigin();
  EXPECT_EQ(call({"grid", "--config", cfg.string(), "--resolution", "100", "--max-iter", "2", "--out", dir_.string()}),
            0);
  const auto l = lines(slurp(dir_ / "grid.csv"));
  ASSERT_EQ(l.size(), 1u + 10000u);
  EXPECT_EQ(l[0], "x1,x2,mu,sigma,sigma_b2");
  EXPECT_EQ(l[1].substr(0, 6), "-5,-5,");
  EXPECT_EQ(l[100].substr(0, 5), "5,-5,");
  EXPECT_EQ(l[9901].substr(0, 5), "-5,5,");
  EXPECT_EQ(l[10000].substr(0, 4), "5,5,");
}

TEST_F(CliTest, GridRejectsOneDimensionalModels) {
  const auto cfg = write_config(R"({"limit_state": {"kind": "linear_gaussian"}, "pool": {"size": 500}})");
  std::string err;
  EXPECT_EQ(call({"grid", "--config", cfg.string(), "--out", dir_.string()}, &err), 1);
  EXPECT_NE(err.find("2-dimensional"), std::string::npos);
}

TEST_F(CliTest, BadFlagsExitOne) {
  const auto cfg = small_rastrigin();
  EXPECT_EQ(call({"run", "--config", cfg.string(), "--strategy", "bogus", "--out", dir_.string()}), 1);
  EXPECT_EQ(call({"run", "--config", cfg.string(), "--n-para", "0"}), 1);
  EXPECT_EQ(call({"frobnicate"}), 1);
  EXPECT_EQ(call({}), 1);
}
