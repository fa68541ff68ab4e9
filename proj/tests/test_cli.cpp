#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "robustam/commands.hpp"
#include "robustam/config.hpp"
#include "robustam/errors.hpp"
#include "robustam/lattice_io.hpp"

using namespace robustam;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("robustam_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const Json& j) const {
    write_text_file(path(name), dump(j));
    return path(name);
  }

  int call(const std::string& command, CommandOptions opt) {
    std::ostringstream out, err;
    const int rc = run(command, opt, out, err);
    last_out_ = out.str();
    last_err_ = err.str();
    return rc;
  }

  Json report(const std::string& out_dir) const { return read_json_file((fs::path(out_dir) / "report.json").string()); }

  fs::path dir_;
  std::string last_out_, last_err_;
};

Json binomial_config(int steps, double u) {
  Json step = {{"increments", {-u, u}}};
  Json dates = Json::array();
  for (int t = 0; t <= steps; ++t) dates.push_back(static_cast<double>(t) / steps);
  return {{"schema", kScenarioSchema},
          {"lattice", {{"dates", dates}, {"x0", {1.0}}, {"step", step}}},
          {"payoff", {{"type", "put"}, {"strike", 1.0}}}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_F(Cli, GapDemoReportsTheStrictGap) {
  CommandOptions opt;
  opt.out_dir = path("gap");
  ASSERT_EQ(call("gap-demo", opt), 0) << last_err_;
  const Json v = report(opt.out_dir)["result"]["values"];
  EXPECT_NEAR(v["static_primal"].get<double>(), 0.075, 1e-7);
  EXPECT_NEAR(v["lifted_primal"].get<double>(), 0.0875, 1e-7);
  EXPECT_GT(v["gap"].get<double>(), 0.01);
  EXPECT_TRUE(v["ordering_ok"].get<bool>());
  EXPECT_NE(last_out_.find("gap-demo: exit 0"), std::string::npos);
}

TEST_F(Cli, ReportsAreReproducibleApartFromTiming) {
  CommandOptions a, b;
  a.out_dir = path("a");
  b.out_dir = path("b");
  ASSERT_EQ(call("gap-demo", a), 0);
  ASSERT_EQ(call("gap-demo", b), 0);
  Json ra = report(a.out_dir), rb = report(b.out_dir);
  ra.erase("timing");
  rb.erase("timing");
  EXPECT_EQ(dump(ra), dump(rb));
  EXPECT_EQ(ra["schema"], kReportSchema);
  for (const auto& e : fs::directory_iterator(a.out_dir))
    if (e.path().extension() == ".csv") EXPECT_EQ(slurp(e.path()), slurp(fs::path(b.out_dir) / e.path().filename()));
}

TEST_F(Cli, PriceAgreesWithTheRecursion) {
  CommandOptions opt;
  opt.config_path = write("put.json", binomial_config(3, 0.1));
  opt.out_dir = path("out");
  ASSERT_EQ(call("price", opt), 0) << last_err_;
  const Json r = report(opt.out_dir)["result"];
  EXPECT_TRUE(r["dpp_agrees"].get<bool>());
  EXPECT_NEAR(r["value"].get<double>(), r["dpp_value"].get<double>(), 1e-7);
  EXPECT_TRUE(fs::exists(fs::path(opt.out_dir) / "measure.csv"));
}

TEST_F(Cli, HedgeWritesStrategyTables) {
  Json cfg = binomial_config(2, 0.1);
  cfg["options"] = {{{"type", "call"}, {"strike", 1.0}, {"price", 0.05}}};
  CommandOptions opt;
  opt.config_path = write("hedge.json", cfg);
  opt.out_dir = path("out");
  ASSERT_EQ(call("hedge", opt), 0) << last_err_;
  const Json r = report(opt.out_dir)["result"];
  EXPECT_GE(r["shortfall"].get<double>(), -1e-7);
  EXPECT_TRUE(fs::exists(fs::path(opt.out_dir) / "strategy.csv"));
  EXPECT_TRUE(fs::exists(fs::path(opt.out_dir) / "multipliers.csv"));
}

TEST_F(Cli, SchemaErrorsExitWithFour) {
  CommandOptions opt;
  opt.out_dir = path("out");
  EXPECT_EQ(call("price", opt), 4);  // no --config
  Json bad = binomial_config(2, 0.1);
  bad["schema"] = "robustam.scenario/0";
  opt.config_path = write("bad.json", bad);
  EXPECT_EQ(call("price", opt), 4);
  Json no_payoff = binomial_config(2, 0.1);
  no_payoff.erase("payoff");
  opt.config_path = write("nopay.json", no_payoff);
  EXPECT_EQ(call("chain", opt), 4);
  write_text_file(path("garbage.json"), "{ not json");
  opt.config_path = path("garbage.json");
  EXPECT_EQ(call("price", opt), 4);
}

TEST_F(Cli, EmptyClassExitsWithTwo) {
  // A single path cannot carry positive conditional variance.
  Json cfg = binomial_config(2, 0.0);
  cfg["lattice"]["step"] = {{"increments", {0.0}}};
  cfg["band"] = {{"lo", 0.01}, {"hi", 0.02}};
  CommandOptions opt;
  opt.config_path = write("empty.json", cfg);
  opt.out_dir = path("out");
  EXPECT_EQ(call("price", opt), 2) << last_err_;
  EXPECT_EQ(call("hedge", opt), 2) << last_err_;
}

TEST_F(Cli, PathCapExitsWithThree) {
  Json cfg = binomial_config(12, 0.1);
  cfg["lattice"]["max_paths"] = 100;
  CommandOptions opt;
  opt.config_path = write("big.json", cfg);
  opt.out_dir = path("out");
  EXPECT_EQ(call("price", opt), 3) << last_err_;
}

TEST_F(Cli, DecomposeRepairsAnAnticipativeMeasure) {
  // Stop at once on the path that stays flat, at the end otherwise: a
  // martingale on the enlarged space that no stopping time of X produces.
  LatticeSpec spec;
  spec.grid.dates = {0.0, 1.0, 2.0};
  spec.x0 = {1.0};
  spec.steps = {StepSpec{{{0.0}}, {}}, StepSpec{{{-0.1}, {0.0}, {0.1}}, {}}};
  MeasureFile f{build_lattice(spec), {}, std::nullopt, {}};
  f.mu.theta_dates = {0, 1, 2};
  f.mu.num_paths = 3;
  f.mu.w = {0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.25, 0.0, 0.25};
  f.tests.push_back({"one", {{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}}, true});
  f.tests.push_back({"peek", {{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}}, false});
  CommandOptions opt;
  opt.config_path = write("mu.json", measure_file_to_json(f));
  opt.out_dir = path("out");
  ASSERT_EQ(call("decompose", opt), 0) << last_err_;
  const Json r = report(opt.out_dir)["result"];
  EXPECT_TRUE(r["eps_applied"].get<bool>());
  EXPECT_TRUE(r["martingale_ok"].get<bool>());
  EXPECT_LE(r["max_reconstruction_error"].get<double>(), 1e-10);
  EXPECT_TRUE(fs::exists(fs::path(opt.out_dir) / "azema.csv"));

  opt.eps = 0.0;  // modification forbidden
  EXPECT_EQ(call("decompose", opt), 2);
}

TEST_F(Cli, IntegrateTablesAndStrictFlag) {
  Json cfg = binomial_config(1, 0.1);
  cfg["integrate"] = {{"level", 10}, {"seeds", 3}, {"sigma", 0.3}};
  CommandOptions opt;
  opt.config_path = write("int.json", cfg);
  opt.out_dir = path("out");
  ASSERT_EQ(call("integrate", opt), 0) << last_err_;
  const Json r = report(opt.out_dir)["result"];
  EXPECT_LE(r["max_exact_identity_residual"].get<double>(), 1e-12);
  EXPECT_EQ(r["convergence"].size(), 7u);  // levels 4..10
  EXPECT_FALSE(r["strict"].get<bool>());
  EXPECT_TRUE(fs::exists(fs::path(opt.out_dir) / "convergence.csv"));
  EXPECT_TRUE(fs::exists(fs::path(opt.out_dir) / "beta.csv"));

  opt.strict_integration = true;
  ASSERT_EQ(call("integrate", opt), 0);
  EXPECT_TRUE(report(opt.out_dir)["result"]["strict"].get<bool>());

  cfg["integrate"]["level"] = kMaxLevel + 1;
  opt.config_path = write("int_bad.json", cfg);
  EXPECT_EQ(call("integrate", opt), 4);
}

TEST_F(Cli, OverridesReachTheScenario) {
  CommandOptions opt;
  opt.seed = 7;
  opt.eps = 0.1;
  opt.rule_cap = 5;
  const Json c = apply_overrides(binomial_config(1, 0.1), opt);
  EXPECT_EQ(c["seed"], 7);
  EXPECT_EQ(c["solver"]["eps"], 0.1);
  EXPECT_EQ(c["solver"]["rule_cap"], 5);
  EXPECT_THROW(apply_overrides(Json::array(), opt), SchemaError);
}

TEST_F(Cli, BinaryExitCodes) {
  const std::string exe = ROBUSTAM_CLI;
  auto sh = [&](const std::string& args) {
    const int rc = std::system((exe + " " + args + " > " + path("log.txt") + " 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  EXPECT_EQ(sh("gap-demo --out " + path("bin")), 0);
  EXPECT_TRUE(fs::exists(fs::path(path("bin")) / "report.json"));
  EXPECT_EQ(sh("price --out " + path("bin")), 4);
  EXPECT_EQ(sh("price --no-such-flag"), 4);
  EXPECT_EQ(sh("--help"), 0);
}
