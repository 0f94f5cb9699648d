// One-time-slice maintenance decision process: a classifier turns an
// observation symbol into a posterior over the joint health state H_t, a
// transition model forecasts H_{t+1} under each action, a compiled fault tree
// maps health states to failure probability, and utilities on failure (at t
// and t+1) and on the action are combined into expected utility.
#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "riskdesk/fault_tree.hpp"
#include "riskdesk/pgm.hpp"

namespace riskdesk::decision {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Above this joint size transitions stay in per-component form.
inline constexpr std::size_t kDenseStateLimit = 1024;

/// Relative width of the band inside which action values count as tied.
inline constexpr double kTieTolerance = 1e-12;

struct HealthComponent {
  std::string variable;
  std::vector<std::string> states;
};

/// Joint health variable H as the lexicographic product of component state
/// lists, first component most significant.
class HealthStateSpace {
 public:
  HealthStateSpace() = default;
  explicit HealthStateSpace(std::vector<HealthComponent> components);

  std::size_t size() const { return size_; }
  const std::vector<HealthComponent>& components() const { return components_; }
  std::vector<std::size_t> dims() const;

  std::vector<std::size_t> decode(std::size_t state) const;
  std::size_t encode(const std::vector<std::size_t>& component_states) const;
  /// Component labels joined with '/'.
  std::string label(std::size_t state) const;
  std::optional<std::size_t> find(std::string_view label) const;
  /// Health variable id -> state label, as evidence for the failure network.
  pgm::Evidence assignment(std::size_t state) const;

 private:
  std::vector<HealthComponent> components_;
  std::size_t size_ = 0;
};

enum class ClassifierForm { kGenerative, kDiscriminative };

/// Generative form stores P(H) and P(nu | H); discriminative form stores
/// P(H | nu) and P(nu). Both expose an equivalent likelihood so beliefs other
/// than the prior can be conditioned.
class ClassifierModel {
 public:
  ClassifierModel() = default;

  /// `likelihood` is |H| x |nu|; row h is P(nu | H = h).
  static ClassifierModel generative(std::vector<std::string> symbols, Vector prior,
                                    Matrix likelihood);
  /// `posterior` is |nu| x |H|; row v is P(H | nu = v).
  static ClassifierModel discriminative(std::vector<std::string> symbols, Matrix posterior,
                                        Vector symbol_prior);

  ClassifierForm form() const { return form_; }
  const std::vector<std::string>& symbols() const { return symbols_; }
  std::size_t symbol_index(std::string_view symbol) const;
  const Vector& prior() const { return prior_; }
  const Matrix& likelihood() const { return likelihood_; }
  /// Discriminative table; empty for the generative form.
  const Matrix& posterior_table() const { return posterior_; }

  /// P(nu) under a belief over H.
  Vector predictive(const Vector& belief) const;

 private:
  ClassifierForm form_ = ClassifierForm::kGenerative;
  std::vector<std::string> symbols_;
  Vector prior_;
  Matrix likelihood_;
  Matrix posterior_;
};

/// P(H_{t+1} | H_t, d) per action, optionally conditioned on a shared
/// environment that is marginalized with `environment_weights` when
/// forecasting.
class TransitionModel {
 public:
  TransitionModel() = default;

  /// Dense joint matrices, one per action, no environment parent.
  static TransitionModel dense(std::vector<Matrix> per_action);

  /// Per-component matrices indexed [action][environment][component].
  /// Components evolve independently given action and environment. The
  /// joint matrices are materialized when |H| <= kDenseStateLimit unless
  /// `keep_factored` is set.
  static TransitionModel factored(std::vector<std::string> environments,
                                  Vector environment_weights,
                                  std::vector<std::vector<std::vector<Matrix>>> factors,
                                  bool keep_factored = false);

  std::size_t action_count() const;
  bool is_dense() const { return !mixed_.empty(); }
  bool has_factors() const { return !factors_.empty(); }
  const std::vector<std::string>& environments() const { return environments_; }
  const Vector& environment_weights() const { return environment_weights_; }
  const std::vector<std::vector<std::vector<Matrix>>>& factors() const { return factors_; }
  /// Environment-marginalized joint matrix for an action (dense form only).
  const Matrix& joint(std::size_t action) const { return mixed_.at(action); }

  Vector propagate(const Vector& belief, std::size_t action) const;

 private:
  std::vector<std::string> environments_;
  Vector environment_weights_;
  std::vector<std::vector<std::vector<Matrix>>> factors_;
  std::vector<Matrix> mixed_;
};

/// Compiled failure mode: health roots plus the fault tree's event and gate
/// variables, with per-state failure probabilities tabulated through it.
struct FailureModel {
  fault_tree::FaultTree tree;
  pgm::BayesNet network;
  /// P(top = failed | H = h).
  Vector top_failure;
  /// Same for every event and gate variable.
  std::map<std::string, Vector> node_failure;

  static FailureModel compile(const HealthStateSpace& health, const fault_tree::FaultTree& tree);
};

struct UtilityModel {
  /// U_F over {ok, failed} for the current slice and the next.
  Vector failure_now = Vector::Zero(2);
  Vector failure_next = Vector::Zero(2);
  /// U_d per action.
  Vector action;
};

class DecisionModel {
 public:
  DecisionModel(HealthStateSpace health, ClassifierModel classifier, TransitionModel transition,
                std::shared_ptr<const FailureModel> failure, UtilityModel utility,
                std::vector<std::string> actions);

  const HealthStateSpace& health() const { return health_; }
  const ClassifierModel& classifier() const { return classifier_; }
  const TransitionModel& transition() const { return transition_; }
  const FailureModel& failure() const { return *failure_; }
  std::shared_ptr<const FailureModel> failure_ptr() const { return failure_; }
  const UtilityModel& utility() const { return utility_; }
  const std::vector<std::string>& actions() const { return actions_; }
  std::size_t action_index(std::string_view action) const;
  std::size_t observation_index(std::string_view symbol) const {
    return classifier_.symbol_index(symbol);
  }

  /// E[U_F(F_t) | H_t = h] and E[U_F(F_{t+1}) | H_{t+1} = h].
  const Vector& failure_utility_now() const { return euf_now_; }
  const Vector& failure_utility_next() const { return euf_next_; }

  DecisionModel with_utility(UtilityModel utility) const;
  DecisionModel with_transition(TransitionModel transition) const;
  DecisionModel with_classifier(ClassifierModel classifier) const;

 private:
  void check() const;

  HealthStateSpace health_;
  ClassifierModel classifier_;
  TransitionModel transition_;
  std::shared_ptr<const FailureModel> failure_;
  UtilityModel utility_;
  std::vector<std::string> actions_;
  Vector euf_now_;
  Vector euf_next_;
};

/// Posterior over H_t from the model prior and one observation.
Vector posterior_health(const DecisionModel& model, std::size_t observation);
Vector posterior_health(const DecisionModel& model, std::string_view observation);

/// Bayes update of an arbitrary belief over H_t by one observation.
Vector condition(const DecisionModel& model, const Vector& belief, std::size_t observation);

Vector forecast(const DecisionModel& model, const Vector& belief, std::size_t action);

/// Expected utility of an action given a posterior over H_t.
double expected_utility_given(const DecisionModel& model, const Vector& posterior,
                              std::size_t action);
double expected_utility(const DecisionModel& model, std::size_t observation, std::size_t action);

/// Expected utility of every action, in declaration order.
Vector action_values(const DecisionModel& model, const Vector& posterior);

struct Choice {
  std::size_t action = 0;
  double value = 0.0;
};

/// First index attaining the maximum, with near-ties resolved to the earlier.
std::size_t argmax_first(const Vector& values);

Choice solve_given(const DecisionModel& model, const Vector& posterior);
Choice solve_single_stage(const DecisionModel& model, std::size_t observation);
/// Best action with no observation, from the model prior.
Choice solve_without_observation(const DecisionModel& model);

struct Policy {
  /// Action index per observation symbol, in symbol order.
  std::vector<std::size_t> action_of;
};

struct PolicySolution {
  Policy policy;
  /// Sum over symbols of P(nu) * MEU(nu).
  double value = 0.0;
  Vector symbol_probability;
  Vector symbol_value;
};

PolicySolution solve_policy(const DecisionModel& model);

/// Ground truth the rolling loop acts against.
class Feed {
 public:
  virtual ~Feed() = default;
  /// Next observation index, or nullopt when the feed has run dry.
  virtual std::optional<std::size_t> observe() = 0;
  /// Applies the action to the world; returns the realized utility.
  virtual double apply(std::size_t action) = 0;
};

/// Belief tracker for one structure: condition on an observation, act
/// greedily on the one-slice expected utility, forecast under the action.
class Agent {
 public:
  Agent(std::shared_ptr<const DecisionModel> model, Vector belief);

  const DecisionModel& model() const { return *model_; }
  std::shared_ptr<const DecisionModel> model_ptr() const { return model_; }
  /// Belief over the current health state before this slice's observation.
  const Vector& belief() const { return belief_; }
  /// Belief after conditioning on this slice's observations.
  const Vector& posterior() const { return posterior_; }

  /// An observation the current belief rules out restarts the belief from
  /// uniform before conditioning; one no health state can emit still throws.
  void observe(std::size_t observation);
  Choice decide() const;
  /// Commits an action: the forecast becomes the next slice's belief.
  void commit(std::size_t action);
  void replace_model(std::shared_ptr<const DecisionModel> model);

 private:
  std::shared_ptr<const DecisionModel> model_;
  Vector belief_;
  Vector posterior_;
};

struct TrajectoryStep {
  std::size_t step = 0;
  std::size_t observation = 0;
  std::size_t action = 0;
  double expected_utility = 0.0;
  double realized_utility = 0.0;
  Vector posterior;
  Vector next_belief;
};

std::vector<TrajectoryStep> rolling_horizon(std::shared_ptr<const DecisionModel> model,
                                            const Vector& initial_belief, std::size_t horizon,
                                            Feed& feed);

/// Replays fixed observations; realized utility comes from a per-action table.
class ScriptedFeed : public Feed {
 public:
  ScriptedFeed(std::vector<std::size_t> observations, std::vector<double> utility_per_action);

  std::optional<std::size_t> observe() override;
  double apply(std::size_t action) override;

 private:
  std::vector<std::size_t> observations_;
  std::vector<double> utility_;
  std::size_t next_ = 0;
};

}  // namespace riskdesk::decision
