#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bsplab/experiment.hpp"

using namespace bsplab;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs{BSPLAB_CONFIG_DIR};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("bsplab_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(BSPLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

int run(const std::string& command, Json doc, const fs::path& out, Overrides ov = {}) {
  ov.out_dir = out.string();
  std::ostringstream log, err;
  return run_command(command, make_config(std::move(doc), ov, kConfigs), log, err);
}

Json load(const std::string& name) {
  std::ifstream in(kConfigs / name);
  return Json::parse(in, nullptr, true, true);
}

}  // namespace

TEST(Config, OverridesTakePrecedence) {
  Overrides ov;
  ov.seed = 99;
  ov.out_dir = "elsewhere";
  ov.axis = "kappa";
  const auto cfg = make_config(load("sweep.json"), ov);
  EXPECT_EQ(*cfg.seed, 99u);
  EXPECT_EQ(cfg.out_dir, fs::path("elsewhere"));
  EXPECT_EQ(cfg.doc["sweep"]["axis"], "kappa");
}

TEST(Config, HashDependsOnContent) {
  const auto a = make_config(load("sweep.json"), {});
  Overrides ov;
  ov.seed = 1;
  const auto b = make_config(load("sweep.json"), ov);
  EXPECT_NE(config_hash(a.doc), config_hash(b.doc));
  EXPECT_EQ(config_hash(a.doc), config_hash(make_config(load("sweep.json"), {}).doc));
  Overrides out;
  out.out_dir = "somewhere/else";
  EXPECT_EQ(config_hash(a.doc), config_hash(make_config(load("sweep.json"), out).doc));
}

TEST(Config, RejectsBadFields) {
  const auto out = scratch("bad");
  auto doc = load("check_tail_overbid.json");
  doc["mechanism"]["k"] = 3;  // k >= B
  EXPECT_EQ(run("check", doc, out), kExitConfig);
  doc = load("check_tail_overbid.json");
  doc["scenario"]["values"] = Json::array({5, "3.05", 1});
  EXPECT_EQ(run("check", doc, out), kExitConfig);
  doc = load("check_tail_overbid.json");
  doc["long_run"]["pi0"] = 1;
  EXPECT_EQ(run("check", doc, out), kExitConfig);
  doc = load("simulate_honest.json");
  doc.erase("seed");
  EXPECT_EQ(run("simulate", doc, out), kExitConfig);
  doc = load("sweep.json");
  doc["sweep"]["axis"] = "theta";
  EXPECT_EQ(run("sweep", doc, out), kExitConfig);
  EXPECT_EQ(run("nonsense", load("sweep.json"), out), kExitConfig);
}

TEST(Check, InHypothesisScenarioIsClean) {
  const auto out = scratch("theorem");
  EXPECT_EQ(run("check", load("check_theorem.json"), out), kExitOk);
  const auto report = Json::parse(slurp(out / "check_report.json"));
  EXPECT_FALSE(report["violations_found"].get<bool>());
  EXPECT_EQ(report["results"].size(), 2u + 6u);
  EXPECT_TRUE(report.contains("config_hash"));
}

TEST(Check, TailOverbidReportsViolation) {
  const auto out = scratch("tail_overbid");
  EXPECT_EQ(run("check", load("check_tail_overbid.json"), out), kExitViolation);
  const auto report = Json::parse(slurp(out / "check_report.json"));
  const auto& cx = report["counterexample"];
  EXPECT_EQ(cx["delta_exact"], "7/10");
  EXPECT_EQ(cx["predicted_delta_exact"], "7/10");
}

TEST(Block, OutcomeFields) {
  const auto out = scratch("block");
  EXPECT_EQ(run("block", load("block.json"), out), kExitOk);
  const auto j = Json::parse(slurp(out / "block.json"));
  const auto& o = j["outcome"];
  EXPECT_EQ(o["payment_exact"], "2");
  EXPECT_EQ(o["miner_revenue_exact"], "1");
  EXPECT_EQ(o["expected_burn_exact"], "3");
  EXPECT_EQ(o["confirm_prob_exact"], "1/2");
  EXPECT_EQ(o["confirmed"].size(), 2u);
}

TEST(Block, RejectsOffTickBid) {
  const auto out = scratch("block_tick");
  const auto mempool = out / "pool.csv";
  std::ofstream(mempool) << "0,0,9,9\n1,1,7,7\n2,2,5,5.5\n3,3,4,4\n4,4,2,2\n";
  auto doc = load("block.json");
  doc["block"]["mempool"] = mempool.string();
  EXPECT_EQ(run("block", doc, out), kExitConfig);
}

TEST(Sweep, ShapeVerdicts) {
  for (const char* axis : {"pi0", "R", "delta", "kappa"}) {
    const auto out = scratch(std::string("sweep_") + axis);
    auto doc = load("sweep.json");
    doc["sweep"]["axis"] = axis;
    doc["sweep"]["from"] = 0.05;
    doc["sweep"]["to"] = std::string(axis) == "pi0" ? 0.95 : 20.0;
    EXPECT_EQ(run("sweep", doc, out), kExitOk) << axis;
    const auto verdict = Json::parse(slurp(out / ("sweep_" + std::string(axis) + ".json")));
    EXPECT_TRUE(verdict["pass"].get<bool>()) << axis;
    EXPECT_NE(slurp(out / ("sweep_" + std::string(axis) + ".csv")).find(std::string(axis) + ",theta_bar,feasible"),
              std::string::npos);
  }
}

TEST(Sweep, PeakOnRewardAxis) {
  SweepBase base;
  const auto grid = linear_grid(0.01, 10, 2000);
  const auto r = sweep_theta_bar(base, "R", grid);
  ASSERT_TRUE(r.peak.has_value());
  double best_x = 0, best = -1;
  for (const auto& pt : r.points) {
    if (pt.theta_bar && *pt.theta_bar > best) {
      best = *pt.theta_bar;
      best_x = pt.x;
    }
  }
  EXPECT_NEAR(best_x, *r.peak, 0.01);
  // A coarse grid straddles the peak with a rising pair.
  const auto coarse = linear_grid(0.01, 10, 100);
  EXPECT_TRUE(sweep_theta_bar(base, "R", coarse).shape_pass);
}

TEST(Simulate, OutputsAndDeterminism) {
  auto doc = load("simulate_honest.json");
  doc["simulate"]["paths"] = 200;
  doc["simulate"]["horizon"] = 200;
  doc["simulate"]["checkpoints"] = Json::array({0, 100, 200});
  const auto a = scratch("sim_a");
  const auto b = scratch("sim_b");
  ASSERT_EQ(run("simulate", doc, a), kExitOk);
  ASSERT_EQ(run("simulate", doc, b), kExitOk);
  EXPECT_EQ(slurp(a / "trajectories.csv"), slurp(b / "trajectories.csv"));
  EXPECT_EQ(slurp(a / "simulate_summary.json"), slurp(b / "simulate_summary.json"));
  const auto summary = Json::parse(slurp(a / "simulate_summary.json"));
  EXPECT_EQ(summary["regime"], "honest");
  EXPECT_TRUE(summary["martingale"]["pass"].get<bool>());

  Overrides ov;
  ov.seed = 8;
  const auto c = scratch("sim_c");
  ASSERT_EQ(run("simulate", doc, c, ov), kExitOk);
  EXPECT_NE(slurp(a / "trajectories.csv"), slurp(c / "trajectories.csv"));
}

TEST(Simulate, OverpaidInvariantIsExact) {
  auto doc = load("simulate_overpaid.json");
  doc["simulate"]["paths"] = 20;
  doc["simulate"]["horizon"] = 2000;
  doc["simulate"]["p"] = "2.5";
  const auto out = scratch("sim_over");
  ASSERT_EQ(run("simulate", doc, out), kExitOk);
  const auto summary = Json::parse(slurp(out / "simulate_summary.json"));
  EXPECT_EQ(summary["regime"], "overpaid");
  EXPECT_EQ(summary["invariant_residual_exact"], "0");
  EXPECT_EQ(summary["scale"], 2);
}

TEST(Cli, ExitCodes) {
  const auto out = scratch("cli");
  const std::string o = " --out " + out.string();
  EXPECT_EQ(cli("block --config " + (kConfigs / "block.json").string() + o), 0);
  EXPECT_EQ(cli("check --config " + (kConfigs / "check_tail_overbid.json").string() + o), 3);
  EXPECT_EQ(cli("check --mode theorem --config " + (kConfigs / "check_tail_overbid.json").string() + o), 3);
  EXPECT_EQ(cli("sweep --axis kappa --config " + (kConfigs / "sweep.json").string() + o), 0);
  EXPECT_EQ(cli("sweep --axis theta --config " + (kConfigs / "sweep.json").string() + o), 2);
  EXPECT_EQ(cli("check --config /nonexistent.json" + o), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_TRUE(fs::exists(out / "sweep_kappa.csv"));
}

TEST(Cli, SeedFlagIsByteDeterministic) {
  const auto a = scratch("cli_a");
  const auto b = scratch("cli_b");
  const std::string cfg = " --config " + (kConfigs / "block.json").string();
  ASSERT_EQ(cli("block --seed 11" + cfg + " --out " + a.string()), 0);
  ASSERT_EQ(cli("block --seed 11" + cfg + " --out " + b.string()), 0);
  EXPECT_EQ(slurp(a / "block.json"), slurp(b / "block.json"));
  EXPECT_NE(slurp(a / "block.json").find("\"seed\": 11"), std::string::npos);
}
