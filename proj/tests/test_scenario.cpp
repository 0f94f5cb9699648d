#include <gtest/gtest.h>

#include "riskdesk/error.hpp"
#include "riskdesk/scenario.hpp"

using namespace riskdesk;
using namespace riskdesk::scenario;
using nlohmann::json;

namespace {

const std::filesystem::path kScenarios = std::filesystem::path(RISKDESK_SOURCE_DIR) / "scenarios";

// One type with two binary components under a two-state environment.
json small_doc() {
  return json::parse(R"({
    "name": "small",
    "seed": 3,
    "horizon": 5,
    "environment": {"states": ["calm", "storm"], "transition": [[0.8, 0.2], [0.4, 0.6]]},
    "actions": [{"id": "wait"}, {"id": "fix_a", "cost": -2, "resets": ["a"]}],
    "utilities": {"failure": {"ok": 1, "failed": -50}, "failure_now": {"failed": -5}},
    "types": {
      "t": {
        "fault_tree_text": "tree t\nevent ea binds a failed {bad}\nevent eb binds b failed {bad}\ntop F = AND(ea, eb)\n",
        "substructures": [{"id": "s", "components": [
          {"id": "a", "states": ["ok", "bad"]},
          {"id": "b", "kind": "joint", "states": ["ok", "bad"]}]}],
        "prior": [0.4, 0.3, 0.2, 0.1],
        "truth": {
          "degradation": {"a": {"calm": [[0.9, 0.1], [0, 1]], "storm": [[0.5, 0.5], [0, 1]]},
                          "b": [[0.7, 0.3], [0, 1]]},
          "classifier": {"accuracy": 0.7}
        },
        "belief": {"degradation": {"a": [[1, 0], [0, 1]]}}
      }
    },
    "population": {"groups": [{"id": "g", "merged": true, "farms": [{"id": "f", "type": "t", "size": 2}]}]}
  })");
}

ErrorCode code_of(const json& doc) {
  try {
    Scenario::from_json(doc, kScenarios);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::kIo;
}

}  // namespace

TEST(Scenario, Farm10Loads) {
  const auto s = Scenario::load(kScenarios / "farm10.json");
  EXPECT_EQ(s.name(), "farm10");
  EXPECT_EQ(s.seed(), 7u);
  EXPECT_EQ(s.horizon(), 100u);
  EXPECT_EQ(s.action_ids(), (std::vector<std::string>{"do_nothing", "repair"}));
  EXPECT_TRUE(s.actions()[1].resets_component("tower"));
  EXPECT_FALSE(s.actions()[0].resets_component("tower"));
  const auto& t = s.type("turbine3");
  EXPECT_EQ(t.health.size(), 81u);
  EXPECT_EQ(t.component_ids(), (std::vector<std::string>{"blade1", "blade2", "blade3", "tower"}));
  EXPECT_EQ(s.utility().failure_now, s.utility().failure_next);
  EXPECT_TRUE(s.start_healthy());
  EXPECT_THROW(s.type("turbine4"), Error);
  EXPECT_THROW(s.action_index("inspect"), Error);
}

TEST(Scenario, Farm10FailureIsAnyComponentFailed) {
  const auto s = Scenario::load(kScenarios / "farm10.json");
  const auto& t = s.type("turbine3");
  for (std::size_t h = 0; h < t.health.size(); ++h) {
    bool any = false;
    for (auto c : t.health.decode(h)) any = any || c == 2;
    EXPECT_EQ(t.failure->top_failure(static_cast<Eigen::Index>(h)), any ? 1.0 : 0.0) << t.health.label(h);
  }
}

TEST(Scenario, Farm10ForecastFromHealthy) {
  const auto s = Scenario::load(kScenarios / "farm10.json");
  const auto& model = *s.type("turbine3").believed;
  const auto healthy = s.initial_belief(s.type("turbine3"));
  EXPECT_EQ(healthy(0), 1.0);
  EXPECT_EQ(decision::forecast(model, healthy, 1)(0), 1.0);
  // Stationary weather is (0.75, 0.25).
  const double stay = 0.75 * 0.97 * 0.97 * 0.97 * 0.995 + 0.25 * 0.88 * 0.88 * 0.88 * 0.98;
  EXPECT_NEAR(decision::forecast(model, healthy, 0)(0), stay, 1e-14);
  const auto pi = s.environment().stationary();
  EXPECT_NEAR(pi(0), 0.75, 1e-14);
  EXPECT_NEAR(pi(1), 0.25, 1e-14);
}

TEST(Scenario, AccuracyClassifier) {
  const auto s = Scenario::load(kScenarios / "farm10.json");
  const auto& c = s.type("turbine3").truth.classifier;
  EXPECT_EQ(c.symbols().size(), 81u);
  EXPECT_EQ(c.symbols()[0], "ok/ok/ok/ok");
  EXPECT_NEAR(c.likelihood()(5, 5), 0.9, 1e-15);
  EXPECT_NEAR(c.likelihood()(5, 6), 0.1 / 80, 1e-15);
}

TEST(Scenario, InlineTreeBeliefAndJoint) {
  const auto s = Scenario::from_json(small_doc(), kScenarios);
  const auto& t = s.type("t");
  EXPECT_TRUE(t.component("b").joint);
  EXPECT_NEAR(s.utility().failure_now(1), -5.0, 0);
  EXPECT_EQ(s.utility().failure_now(0), 0.0);
  EXPECT_EQ(s.utility().failure_next(0), 1.0);
  // Truth: b has one matrix for every environment; belief keeps b, replaces a.
  EXPECT_EQ(t.truth.degradation[0][1], t.truth.degradation[1][1]);
  EXPECT_EQ(t.belief.degradation[1][0], Eigen::MatrixXd::Identity(2, 2));
  EXPECT_EQ(t.belief.degradation[0][1], t.truth.degradation[0][1]);
  // Resetting a keeps b's dynamics.
  const auto fix = s.component_transition(t, 0, 1, t.truth.degradation[1][0]);
  EXPECT_EQ(fix(1, 0), 1.0);
  EXPECT_EQ(s.component_transition(t, 1, 1, t.truth.degradation[1][1]), t.truth.degradation[1][1]);
  // Initial belief is healthy by default.
  EXPECT_EQ(s.initial_belief(t)(0), 1.0);
  auto doc = small_doc();
  doc["initial_belief"] = "prior";
  const auto p = Scenario::from_json(doc, kScenarios);
  EXPECT_NEAR(p.initial_belief(p.type("t"))(3), 0.1, 1e-15);
}

TEST(Scenario, DiscriminativeAndLikelihoodClassifiers) {
  auto doc = small_doc();
  doc["types"]["t"]["truth"]["classifier"] = json::parse(
      R"({"form": "discriminative", "symbols": ["quiet", "noisy"],
          "posterior": [[0.7, 0.1, 0.1, 0.1], [0.1, 0.2, 0.3, 0.4]], "symbol_prior": [0.5, 0.5]})");
  const auto s = Scenario::from_json(doc, kScenarios);
  EXPECT_EQ(s.type("t").truth.classifier.form(), decision::ClassifierForm::kDiscriminative);
  doc["types"]["t"]["truth"]["classifier"] = json::parse(
      R"({"symbols": ["quiet", "noisy"], "likelihood": [[0.9, 0.1], [0.5, 0.5], [0.5, 0.5], [0.1, 0.9]]})");
  const auto g = Scenario::from_json(doc, kScenarios);
  EXPECT_NEAR(g.type("t").truth.classifier.likelihood()(3, 1), 0.9, 0);
}

TEST(Scenario, Rejections) {
  auto doc = small_doc();
  doc["format"] = "something.else";
  EXPECT_EQ(code_of(doc), ErrorCode::kInvalidConfig);

  doc = small_doc();
  doc["types"]["t"]["truth"]["degradation"]["c"] = json::parse("[[1]]");
  EXPECT_EQ(code_of(doc), ErrorCode::kInvalidConfig);

  doc = small_doc();
  doc["types"]["t"]["truth"]["degradation"]["b"] = json::parse("[[0.5, 0.4], [0, 1]]");
  EXPECT_EQ(code_of(doc), ErrorCode::kInvalidModel);

  doc = small_doc();
  doc["types"]["t"]["truth"]["degradation"]["a"] = json::parse(R"({"calm": [[1, 0], [0, 1]]})");
  EXPECT_EQ(code_of(doc), ErrorCode::kInvalidConfig);

  doc = small_doc();
  doc["actions"][1]["resets"] = json::parse(R"(["z"])");
  EXPECT_EQ(code_of(doc), ErrorCode::kInvalidConfig);

  doc = small_doc();
  doc["actions"] = json::array();
  EXPECT_EQ(code_of(doc), ErrorCode::kInvalidConfig);

  doc = small_doc();
  doc["types"]["t"]["fault_tree_text"] = "tree t\nevent e binds zz failed {bad}\ntop F = OR(e)\n";
  EXPECT_EQ(code_of(doc), ErrorCode::kUnboundEvent);

  doc = small_doc();
  doc["types"]["t"]["prior"] = json::parse("[0.5, 0.5]");
  EXPECT_EQ(code_of(doc), ErrorCode::kInvalidConfig);

  doc = small_doc();
  doc["environment"]["transition"] = json::parse("[[0.8, 0.3], [0.4, 0.6]]");
  EXPECT_EQ(code_of(doc), ErrorCode::kInvalidConfig);

  doc = small_doc();
  doc["population"]["groups"][0]["farms"][0]["type"] = "u";
  EXPECT_EQ(code_of(doc), ErrorCode::kInvalidConfig);

  doc = small_doc();
  doc["population"]["groups"][0]["farms"].push_back(json::parse(R"({"id": "f2", "type": "t"})"));
  EXPECT_EQ(code_of(doc), ErrorCode::kInvalidConfig);

  doc = small_doc();
  doc.erase("population");
  EXPECT_EQ(code_of(doc), ErrorCode::kInvalidConfig);

  doc = small_doc();
  doc["utilities"] = 3;
  EXPECT_EQ(code_of(doc), ErrorCode::kInvalidConfig);

  doc = small_doc();
  doc["sacrifice"] = json::parse(R"({"member": "f.t01", "idle_action": "nap"})");
  EXPECT_EQ(code_of(doc), ErrorCode::kUnknownAction);

  EXPECT_THROW(Scenario::load(kScenarios / "missing.json"), Error);
}

TEST(Scenario, MixUniform) {
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
  const auto mixed = mix_uniform(m, 0.2);
  EXPECT_NEAR(mixed(0, 0), 0.9, 1e-15);
  EXPECT_NEAR(mixed(0, 1), 0.1, 1e-15);
  EXPECT_EQ(mix_uniform(m, 0.0), m);
}

TEST(Scenario, ShippedScenariosLoad) {
  for (const char* name : {"farm10.json", "transfer_demo.json", "transfer_mirror.json", "sacrifice_demo.json"}) {
    EXPECT_NO_THROW(Scenario::load(kScenarios / name)) << name;
  }
  EXPECT_TRUE(Scenario::load(kScenarios / "transfer_demo.json").transfer().has_value());
  EXPECT_TRUE(Scenario::load(kScenarios / "sacrifice_demo.json").sacrifice().has_value());
}
