// Scenario files: structure types with their fault trees and true/believed
// model tables, the action domain and its repair semantics, utilities, the
// shared environment chain, and the population layout. Schema in
// docs/formats.md.
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskdesk/decision.hpp"
#include "riskdesk/fault_tree.hpp"

namespace riskdesk::scenario {

using decision::Matrix;
using decision::Vector;

struct ActionSpec {
  std::string id;
  double cost = 0.0;  // U_d; costs are negative utilities
  bool resets_all = false;
  std::set<std::string> resets;

  bool resets_component(const std::string& component) const {
    return resets_all || resets.contains(component);
  }
};

/// Discrete Markov chain shared by coupled structures (calm/storm by default).
struct EnvironmentSpec {
  std::string id = "environment";
  std::vector<std::string> states{"calm"};
  Matrix transition = Matrix::Ones(1, 1);
  std::size_t initial = 0;

  Vector stationary() const;
};

struct ComponentSpec {
  std::string id;
  std::string type_tag;
  bool joint = false;
  std::vector<std::string> states{"ok", "damaged"};
};

struct SubstructureSpec {
  std::string id;
  std::string type_tag;
  std::vector<ComponentSpec> components;
};

/// Per-component degradation [environment][component] (no-repair dynamics)
/// and the observation model.
struct ModelTables {
  std::vector<std::vector<Matrix>> degradation;
  decision::ClassifierModel classifier;
};

struct TypeModel {
  std::string name;
  std::vector<SubstructureSpec> substructures;
  decision::HealthStateSpace health;
  std::shared_ptr<const decision::FailureModel> failure;
  ModelTables truth;
  ModelTables belief;
  std::shared_ptr<const decision::DecisionModel> believed;

  std::vector<std::string> component_ids() const;
  const ComponentSpec& component(const std::string& id) const;
};

struct FarmSpec {
  std::string id;
  std::string type;
  std::size_t size = 1;
  std::optional<std::string> shared_environment;
};

struct GroupSpec {
  std::string id;
  bool merged = false;
  std::optional<std::string> shared_environment;
  std::vector<FarmSpec> farms;
};

struct PopulationSpec {
  std::string inventory = "inventory";
  std::vector<GroupSpec> groups;
};

struct TransferSpec {
  std::string source;
  std::string target;
  std::string payload = "transition";
  std::vector<std::string> scope;
  std::string mechanism = "copy";
  double source_weight = 1.0;
  double target_weight = 1.0;
  std::size_t trials = 200;
};

struct SacrificeSpec {
  std::string member;
  std::string idle_action;
  double prior_strength = 20.0;
  std::size_t trials = 200;
};

class Scenario {
 public:
  static Scenario from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
  static Scenario load(const std::filesystem::path& path);

  const nlohmann::json& source() const { return source_; }
  const std::string& name() const { return name_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t horizon() const { return horizon_; }
  double availability_threshold() const { return availability_threshold_; }
  double transfer_threshold() const { return transfer_threshold_; }
  double perturbation() const { return perturbation_; }
  bool start_healthy() const { return start_healthy_; }
  const std::string& policy() const { return policy_; }
  const EnvironmentSpec& environment() const { return environment_; }
  std::size_t environment_count() const { return environment_.states.size(); }
  const std::vector<ActionSpec>& actions() const { return actions_; }
  std::vector<std::string> action_ids() const;
  std::size_t action_index(const std::string& id) const;
  const decision::UtilityModel& utility() const { return utility_; }
  const std::map<std::string, TypeModel>& types() const { return types_; }
  const TypeModel& type(const std::string& name) const;
  const PopulationSpec& population() const { return population_; }
  const std::optional<std::filesystem::path>& hierarchy_file() const { return hierarchy_file_; }
  const std::optional<TransferSpec>& transfer() const { return transfer_; }
  const std::optional<SacrificeSpec>& sacrifice() const { return sacrifice_; }

  /// Decision model for a type under the given degradation tables and
  /// classifier, with the environment marginalized by its stationary law.
  std::shared_ptr<const decision::DecisionModel> build_model(
      const TypeModel& type, const std::vector<std::vector<Matrix>>& degradation,
      const decision::ClassifierModel& classifier) const;

  /// Per-component transition for an action in an environment.
  Matrix component_transition(const TypeModel& type, std::size_t component, std::size_t action,
                              const Matrix& degradation) const;

  /// Belief the simulator's agents start from.
  Vector initial_belief(const TypeModel& type) const;

 private:
  nlohmann::json source_;
  std::string name_;
  std::uint64_t seed_ = 0;
  std::size_t horizon_ = 0;
  double availability_threshold_ = 0.99;
  double transfer_threshold_ = 0.5;
  double perturbation_ = 0.0;
  bool start_healthy_ = true;
  std::string policy_ = "meu";
  EnvironmentSpec environment_;
  std::vector<ActionSpec> actions_;
  decision::UtilityModel utility_;
  std::map<std::string, TypeModel> types_;
  PopulationSpec population_;
  std::optional<std::filesystem::path> hierarchy_file_;
  std::optional<TransferSpec> transfer_;
  std::optional<SacrificeSpec> sacrifice_;
};

/// Convex mix with the uniform matrix: (1 - rate) M + rate / n.
Matrix mix_uniform(const Matrix& m, double rate);

Matrix matrix_from_json(const nlohmann::json& j);
Vector vector_from_json(const nlohmann::json& j);

}  // namespace riskdesk::scenario
