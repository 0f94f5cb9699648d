// Ground-truth population simulator. True component states evolve by the
// (possibly perturbed) true degradation chains, conditioned on a shared or
// private environment; observations are drawn from the true classifier.
// Agents track beliefs under their own believed models.
//
// Log schema (one JSON object per line) is in docs/formats.md.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskdesk/decision.hpp"
#include "riskdesk/hierarchy.hpp"
#include "riskdesk/scenario.hpp"

namespace riskdesk::sim {

using decision::Matrix;
using decision::Vector;

struct Member {
  std::string structure;
  std::string type;
  std::string farm;
  /// Key of the environment chain driving this member.
  std::string environment;
  /// Perturbation rate applied to the true degradation tables.
  double perturbation = 0.0;
  /// True degradation [environment][component].
  std::vector<std::vector<Matrix>> degradation;
};

/// The population as laid out by a scenario: hierarchy plus per-member truth.
struct World {
  std::shared_ptr<const scenario::Scenario> scenario;
  hierarchy::Hierarchy hierarchy;
  std::vector<Member> members;
  /// KOFN population tree over "down.<structure>" events.
  fault_tree::FaultTree population_tree;
  std::size_t failure_count_threshold = 1;
  std::map<std::string, std::size_t, std::less<>> index;

  std::size_t member_index(std::string_view structure) const;
  const Member& member(std::string_view structure) const { return members[member_index(structure)]; }
  const scenario::TypeModel& type_of(std::string_view structure) const;
};

/// Builds the hierarchy (from the scenario's population block or its
/// hierarchy file) and each member's true tables.
World generate_population(std::shared_ptr<const scenario::Scenario> scenario, std::uint64_t seed);

struct StructureOutcome {
  std::string structure;
  std::size_t step = 0;
  std::size_t environment = 0;
  std::size_t state = 0;
  std::size_t next_state = 0;
  std::size_t action = 0;
  double utility = 0.0;
  bool failed = false;
};

/// Mutable true state of every member. Each structure keeps its own clock,
/// so a structure may be stepped alone.
class GroundTruth {
 public:
  GroundTruth(std::shared_ptr<const World> world, std::uint64_t seed);

  const World& world() const { return *world_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t clock(std::string_view structure) const;
  std::size_t health(std::string_view structure) const;
  const std::vector<std::size_t>& component_states(std::string_view structure) const;
  /// Environment state in effect at a step on a chain.
  std::size_t environment(const std::string& key, std::size_t step);
  bool failed(std::string_view structure) const;

  /// Observation symbol index for the structure's current health state.
  std::size_t observe(std::string_view structure) const;

  StructureOutcome step_structure(std::string_view structure, std::size_t action);
  /// Advances every structure; the action map must be total.
  std::vector<StructureOutcome> step(const std::map<std::string, std::size_t>& actions);

  /// Extends every environment chain through `step` (needed before parallel use).
  void extend_environments(std::size_t step);

 private:
  struct State {
    std::vector<std::size_t> components;
    std::size_t clock = 0;
  };

  std::size_t encode(std::size_t member) const;

  std::shared_ptr<const World> world_;
  std::uint64_t seed_;
  std::vector<State> states_;
  std::map<std::string, std::vector<std::size_t>> environments_;
  std::vector<std::vector<bool>> failure_table_;  // per member, per joint state
};

/// Feed that plays one structure of a ground truth.
class StructureFeed : public decision::Feed {
 public:
  StructureFeed(GroundTruth& truth, std::string structure);
  std::optional<std::size_t> observe() override;
  double apply(std::size_t action) override;

 private:
  GroundTruth& truth_;
  std::string structure_;
};

struct StepRecord {
  StructureOutcome outcome;
  std::size_t observation = 0;
  double expected_utility = 0.0;
};

struct PopulationRecord {
  std::size_t step = 0;
  std::size_t failed_count = 0;
  double availability = 1.0;
  bool population_failed = false;
};

/// Lockstep simulation of every member with one agent each.
class Simulation {
 public:
  /// `policy` is "meu" or an action id applied to every member.
  Simulation(std::shared_ptr<const World> world, std::uint64_t seed, std::string policy = "meu",
             unsigned threads = 1);

  const GroundTruth& truth() const { return truth_; }
  std::size_t step_count() const { return step_; }
  decision::Agent& agent(std::string_view structure);

  /// Forces a member's action until cleared.
  void force(std::string_view structure, std::size_t action);
  void release(std::string_view structure);

  /// One lockstep slice for the whole population.
  std::pair<std::vector<StepRecord>, PopulationRecord> advance();

 private:
  std::shared_ptr<const World> world_;
  GroundTruth truth_;
  std::optional<std::size_t> fixed_action_;
  std::vector<decision::Agent> agents_;
  std::map<std::string, std::size_t, std::less<>> forced_;
  unsigned threads_;
  std::size_t step_ = 0;
};

bool population_failed(const World& world, const std::vector<bool>& member_failed);

struct ExperimentOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> horizon;
  std::optional<std::string> policy;
  unsigned threads = 1;
};

struct ExperimentResult {
  /// Structure records followed by the population record, per step.
  std::vector<nlohmann::ordered_json> log;
  nlohmann::ordered_json summary;
  double total_utility = 0.0;
  std::size_t availability_violations = 0;
};

ExperimentResult run_experiment(std::shared_ptr<const scenario::Scenario> scenario,
                                const ExperimentOptions& options = {});

/// JSON Lines text of a log.
std::string log_text(const std::vector<nlohmann::ordered_json>& log);

}  // namespace riskdesk::sim
