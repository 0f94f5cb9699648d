#include <gtest/gtest.h>

#include <sstream>

#include "riskdesk/decision.hpp"
#include "riskdesk/network_io.hpp"
#include "riskdesk/pgm.hpp"
#include "riskdesk/scenario.hpp"
#include "support/golden.hpp"
#include "support/process.hpp"

using namespace riskdesk;
using nlohmann::json;
using process::quote;

namespace {

const std::filesystem::path kScenarios = std::filesystem::path(RISKDESK_SOURCE_DIR) / "scenarios";

std::string scenario_arg(const std::string& name) { return quote((kScenarios / name).string()); }

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// key=value fields of one records line; values never contain spaces here.
std::map<std::string, std::string> fields(const std::string& line) {
  std::map<std::string, std::string> out;
  std::istringstream in(line);
  for (std::string kv; in >> kv;) {
    const auto eq = kv.find('=');
    out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

}  // namespace

TEST(Cli, CompileKofnDemo) {
  const auto r = process::cli("compile " + quote((kScenarios / "trees" / "kofn_demo.ft").string()));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  golden::expect_matches("kofn_demo.network.json", r.out);

  // Uniform roots: P(two of three lines) = 1/2, P(anchor) = 2/3.
  const auto net = pgm::parse_network(r.out);
  const auto top = pgm::infer(net, {}, "mooring");
  EXPECT_NEAR(top.distribution[1], 1.0 - 0.5 * (1.0 / 3.0), 1e-12);
}

TEST(Cli, CompileToFile) {
  const auto out = process::scratch("compiled.json");
  const auto r = process::cli("compile " + quote((kScenarios / "trees" / "turbine3.ft").string()) +
                              " -o " + quote(out.string()));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  EXPECT_NO_THROW(pgm::read_network_file(out));
}

TEST(Cli, CompileCycleFails) {
  const auto r = process::cli("compile " + quote((kScenarios / "trees" / "cycle.ft").string()));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("cycle detected"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("cycle.ft"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST(Cli, DecideRecordsMatchLibrary) {
  const auto sc = scenario::Scenario::load(kScenarios / "farm10.json");
  const auto& m = *sc.types().at("turbine3").believed;
  const std::string sym = "damaged/failed/ok/ok";
  const auto r = process::cli("decide " + scenario_arg("farm10.json") + " --format records --obs " +
                              "farm_a.t03=" + sym);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 10u);
  const auto blind = decision::solve_without_observation(m);
  const auto seen = decision::solve_single_stage(m, m.observation_index(sym));
  for (const auto& row : rows) {
    const auto f = fields(row);
    const bool observed = f.at("structure") == "farm_a.t03";
    const auto& choice = observed ? seen : blind;
    EXPECT_EQ(f.at("obs"), observed ? sym : "-");
    EXPECT_EQ(f.at("action"), m.actions()[choice.action]);
    EXPECT_EQ(std::stod(f.at("meu")), choice.value) << row;
  }
}

TEST(Cli, DecideRejectsBadObservation) {
  auto r = process::cli("decide " + scenario_arg("farm10.json") + " --obs '*=sideways'");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("unknown-observation"), std::string::npos) << r.err;
  r = process::cli("decide " + scenario_arg("farm10.json") + " --obs nosign");
  EXPECT_EQ(r.exit_code, 1);
  r = process::cli("decide " + scenario_arg("farm10.json") + " --obs ghost=ok/ok/ok/ok");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("unknown-variable"), std::string::npos) << r.err;
}

TEST(Cli, SimulateIsReproducible) {
  const auto a = process::scratch("sim_a"), b = process::scratch("sim_b");
  const auto args = "simulate " + scenario_arg("farm10.json") + " --seed 7 --horizon 20 --format records --out ";
  const auto ra = process::cli(args + quote(a.string()));
  const auto rb = process::cli(args + quote(b.string()) + " --threads 3");
  ASSERT_EQ(ra.exit_code, 0) << ra.err;
  ASSERT_EQ(rb.exit_code, 0) << rb.err;
  EXPECT_EQ(ra.out, rb.out);
  const auto ta = process::slurp(a / "trajectory.jsonl");
  EXPECT_FALSE(ta.empty());
  EXPECT_EQ(ta, process::slurp(b / "trajectory.jsonl"));
  EXPECT_EQ(process::slurp(a / "summary.json"), process::slurp(b / "summary.json"));
  // 10 structure records and one population record per step.
  EXPECT_EQ(lines(ta).size(), 20u * 11u);
}

TEST(Cli, SimulateDefaultsToScenarioSeed) {
  const auto a = process::scratch("sim_default"), b = process::scratch("sim_seed7");
  const auto base = "simulate " + scenario_arg("farm10.json") + " --horizon 5 --out ";
  ASSERT_EQ(process::cli(base + quote(a.string())).exit_code, 0);
  ASSERT_EQ(process::cli(base + quote(b.string()) + " --seed 7").exit_code, 0);
  EXPECT_EQ(process::slurp(a / "trajectory.jsonl"), process::slurp(b / "trajectory.jsonl"));
  const auto c = process::scratch("sim_seed8");
  ASSERT_EQ(process::cli(base + quote(c.string()) + " --seed 8").exit_code, 0);
  EXPECT_NE(process::slurp(a / "trajectory.jsonl"), process::slurp(c / "trajectory.jsonl"));
}

TEST(Cli, SimulateHorizonZero) {
  const auto dir = process::scratch("sim_zero");
  const auto r = process::cli("simulate " + scenario_arg("farm10.json") + " --horizon 0 --out " +
                              quote(dir.string()));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(process::slurp(dir / "trajectory.jsonl").empty());
  const auto summary = json::parse(process::slurp(dir / "summary.json"));
  EXPECT_EQ(summary["total_utility"], 0.0);
}

TEST(Cli, SimulateUnknownPolicy) {
  const auto r = process::cli("simulate " + scenario_arg("farm10.json") + " --policy dance");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("unknown-action"), std::string::npos) << r.err;
}

TEST(Cli, VoiObservation) {
  const auto r = process::cli("voi " + scenario_arg("farm10.json") + " --kind obs --format records");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 1u);
  const auto f = fields(rows[0]);
  EXPECT_EQ(f.at("type"), "turbine3");
  EXPECT_GE(std::stod(f.at("value")), 0.0);
}

TEST(Cli, VoiMissingBlock) {
  const auto r = process::cli("voi " + scenario_arg("farm10.json") + " --kind transfer");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("invalid-config"), std::string::npos) << r.err;
}

TEST(Cli, MissingScenarioFile) {
  const auto r = process::cli("decide /no/such/scenario.json");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("riskdesk: "), std::string::npos);
}
