#include "riskdesk/decision.hpp"

#include <cmath>
#include <set>

#include "riskdesk/error.hpp"
#include "riskdesk/linalg.hpp"

namespace riskdesk::decision {

namespace {

void check_distribution(const Vector& v, const std::string& what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v(i)) || v(i) < 0.0) {
      throw Error(ErrorCode::kInvalidModel, what + " has a negative or non-finite entry");
    }
  }
  if (std::abs(v.sum() - 1.0) > pgm::kProbabilityTolerance) {
    throw Error(ErrorCode::kInvalidModel, what + " does not sum to 1");
  }
}

void check_stochastic(const Matrix& m, const std::string& what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    check_distribution(m.row(r).transpose(), what + " row " + std::to_string(r));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// HealthStateSpace

HealthStateSpace::HealthStateSpace(std::vector<HealthComponent> components)
    : components_(std::move(components)), size_(1) {
  if (components_.empty()) {
    throw Error(ErrorCode::kInvalidModel, "health state space needs at least one component");
  }
  std::set<std::string> ids;
  for (const auto& c : components_) {
    if (!ids.insert(c.variable).second) {
      throw Error(ErrorCode::kInvalidModel, "health component '" + c.variable + "' repeated");
    }
    if (c.states.size() < 2) {
      throw Error(ErrorCode::kInvalidModel,
                  "health component '" + c.variable + "' needs at least two states");
    }
    size_ *= c.states.size();
  }
}

std::vector<std::size_t> HealthStateSpace::dims() const {
  std::vector<std::size_t> d;
  for (const auto& c : components_) d.push_back(c.states.size());
  return d;
}

std::vector<std::size_t> HealthStateSpace::decode(std::size_t state) const {
  std::vector<std::size_t> out(components_.size());
  for (std::size_t k = components_.size(); k-- > 0;) {
    out[k] = state % components_[k].states.size();
    state /= components_[k].states.size();
  }
  return out;
}

std::size_t HealthStateSpace::encode(const std::vector<std::size_t>& component_states) const {
  std::size_t s = 0;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    s = s * components_[k].states.size() + component_states[k];
  }
  return s;
}

std::string HealthStateSpace::label(std::size_t state) const {
  const auto parts = decode(state);
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k) out += '/';
    out += components_[k].states[parts[k]];
  }
  return out;
}

std::optional<std::size_t> HealthStateSpace::find(std::string_view label) const {
  for (std::size_t s = 0; s < size_; ++s) {
    if (this->label(s) == label) return s;
  }
  return std::nullopt;
}

pgm::Evidence HealthStateSpace::assignment(std::size_t state) const {
  const auto parts = decode(state);
  pgm::Evidence ev;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    ev[components_[k].variable] = components_[k].states[parts[k]];
  }
  return ev;
}

// ---------------------------------------------------------------------------
// ClassifierModel

ClassifierModel ClassifierModel::generative(std::vector<std::string> symbols, Vector prior,
                                            Matrix likelihood) {
  if (likelihood.rows() != prior.size() ||
      likelihood.cols() != static_cast<Eigen::Index>(symbols.size())) {
    throw Error(ErrorCode::kInvalidModel, "classifier likelihood must be |H| x |symbols|");
  }
  check_distribution(prior, "classifier prior");
  check_stochastic(likelihood, "classifier likelihood");
  ClassifierModel c;
  c.form_ = ClassifierForm::kGenerative;
  c.symbols_ = std::move(symbols);
  c.prior_ = std::move(prior);
  c.likelihood_ = std::move(likelihood);
  return c;
}

ClassifierModel ClassifierModel::discriminative(std::vector<std::string> symbols,
                                                Matrix posterior, Vector symbol_prior) {
  if (posterior.rows() != static_cast<Eigen::Index>(symbols.size()) ||
      symbol_prior.size() != posterior.rows()) {
    throw Error(ErrorCode::kInvalidModel,
                "discriminative table must be |symbols| x |H| with a matching symbol prior");
  }
  check_stochastic(posterior, "discriminative classifier");
  check_distribution(symbol_prior, "symbol prior");
  ClassifierModel c;
  c.form_ = ClassifierForm::kDiscriminative;
  c.symbols_ = std::move(symbols);
  c.prior_ = posterior.transpose() * symbol_prior;
  // Implied P(nu | h) = P(h | nu) P(nu) / P(h); states the classifier never
  // predicts get an uninformative row.
  c.likelihood_.resize(posterior.cols(), posterior.rows());
  for (Eigen::Index h = 0; h < posterior.cols(); ++h) {
    if (c.prior_(h) > 0.0) {
      c.likelihood_.row(h) =
          posterior.col(h).cwiseProduct(symbol_prior).transpose() / c.prior_(h);
      c.likelihood_.row(h) /= c.likelihood_.row(h).sum();
    } else {
      c.likelihood_.row(h).setConstant(1.0 / static_cast<double>(posterior.rows()));
    }
  }
  c.posterior_ = std::move(posterior);
  return c;
}

std::size_t ClassifierModel::symbol_index(std::string_view symbol) const {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i] == symbol) return i;
  }
  throw Error(ErrorCode::kUnknownObservation,
              "unknown observation symbol '" + std::string(symbol) + "'");
}

Vector ClassifierModel::predictive(const Vector& belief) const {
  return likelihood_.transpose() * belief;
}

// ---------------------------------------------------------------------------
// TransitionModel

TransitionModel TransitionModel::dense(std::vector<Matrix> per_action) {
  TransitionModel t;
  for (std::size_t a = 0; a < per_action.size(); ++a) {
    const auto& m = per_action[a];
    if (m.rows() != m.cols() || m.rows() != per_action.front().rows()) {
      throw Error(ErrorCode::kInvalidModel, "transition matrices must be square and equal size");
    }
    check_stochastic(m, "transition for action " + std::to_string(a));
  }
  t.environment_weights_ = Vector::Ones(1);
  t.mixed_ = std::move(per_action);
  return t;
}

TransitionModel TransitionModel::factored(std::vector<std::string> environments,
                                          Vector environment_weights,
                                          std::vector<std::vector<std::vector<Matrix>>> factors,
                                          bool keep_factored) {
  const std::size_t n_env = std::max<std::size_t>(1, environments.size());
  if (static_cast<std::size_t>(environment_weights.size()) != n_env) {
    throw Error(ErrorCode::kInvalidModel, "environment weights do not match environments");
  }
  check_distribution(environment_weights, "environment weights");
  std::size_t joint = 0;
  for (std::size_t a = 0; a < factors.size(); ++a) {
    if (factors[a].size() != n_env) {
      throw Error(ErrorCode::kInvalidModel,
                  "action " + std::to_string(a) + " lacks per-environment factors");
    }
    for (std::size_t e = 0; e < n_env; ++e) {
      const auto& fs = factors[a][e];
      if (fs.size() != factors[0][0].size()) {
        throw Error(ErrorCode::kInvalidModel, "factor count differs between actions");
      }
      std::size_t prod = 1;
      for (std::size_t c = 0; c < fs.size(); ++c) {
        if (fs[c].rows() != fs[c].cols() || fs[c].rows() != factors[0][0][c].rows()) {
          throw Error(ErrorCode::kInvalidModel, "component factor shapes disagree");
        }
        check_stochastic(fs[c], "component " + std::to_string(c) + " transition");
        prod *= static_cast<std::size_t>(fs[c].rows());
      }
      joint = prod;
    }
  }
  TransitionModel t;
  t.environments_ = std::move(environments);
  t.environment_weights_ = std::move(environment_weights);
  if (!keep_factored && joint <= kDenseStateLimit) {
    for (const auto& per_env : factors) {
      Matrix mixed = Matrix::Zero(static_cast<Eigen::Index>(joint), static_cast<Eigen::Index>(joint));
      for (std::size_t e = 0; e < n_env; ++e) {
        mixed += t.environment_weights_(static_cast<Eigen::Index>(e)) *
                 linalg::kron_all<double>(per_env[e]);
      }
      t.mixed_.push_back(std::move(mixed));
    }
  }
  t.factors_ = std::move(factors);
  return t;
}

std::size_t TransitionModel::action_count() const {
  return is_dense() ? mixed_.size() : factors_.size();
}

Vector TransitionModel::propagate(const Vector& belief, std::size_t action) const {
  if (action >= action_count()) {
    throw Error(ErrorCode::kUnknownAction, "no transition for action " + std::to_string(action));
  }
  if (is_dense()) return linalg::propagate(belief, mixed_[action]);
  Vector out = Vector::Zero(belief.size());
  const auto& per_env = factors_[action];
  for (std::size_t e = 0; e < per_env.size(); ++e) {
    out += environment_weights_(static_cast<Eigen::Index>(e)) *
           linalg::propagate_factored<double>(belief, per_env[e]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// FailureModel

FailureModel FailureModel::compile(const HealthStateSpace& health,
                                   const fault_tree::FaultTree& tree) {
  pgm::BayesNet base;
  for (const auto& c : health.components()) {
    const double u = 1.0 / static_cast<double>(c.states.size());
    base.add(pgm::Variable{c.variable, c.states},
             pgm::Cpt(c.variable, {}, {std::vector<double>(c.states.size(), u)}));
  }
  FailureModel fm;
  fm.tree = tree;
  fm.network = fault_tree::compile_to_bn(tree, base);
  std::vector<std::string> nodes;
  for (const auto& e : tree.events) nodes.push_back(e.id);
  for (const auto& g : tree.gates) nodes.push_back(g.id);
  const auto n = static_cast<Eigen::Index>(health.size());
  for (const auto& id : nodes) fm.node_failure[id] = Vector::Zero(n);
  for (std::size_t h = 0; h < health.size(); ++h) {
    const auto ev = health.assignment(h);
    for (const auto& id : nodes) {
      fm.node_failure[id](static_cast<Eigen::Index>(h)) =
          fault_tree::failure_probability(fm.network, ev, id);
    }
  }
  fm.top_failure = fm.node_failure.at(tree.top);
  return fm;
}

// ---------------------------------------------------------------------------
// DecisionModel

DecisionModel::DecisionModel(HealthStateSpace health, ClassifierModel classifier,
                             TransitionModel transition,
                             std::shared_ptr<const FailureModel> failure, UtilityModel utility,
                             std::vector<std::string> actions)
    : health_(std::move(health)),
      classifier_(std::move(classifier)),
      transition_(std::move(transition)),
      failure_(std::move(failure)),
      utility_(std::move(utility)),
      actions_(std::move(actions)) {
  check();
  const Vector& pf = failure_->top_failure;
  const Vector ok = Vector::Ones(pf.size()) - pf;
  euf_now_ = ok * utility_.failure_now(0) + pf * utility_.failure_now(1);
  euf_next_ = ok * utility_.failure_next(0) + pf * utility_.failure_next(1);
}

void DecisionModel::check() const {
  const auto n = static_cast<Eigen::Index>(health_.size());
  if (!failure_) throw Error(ErrorCode::kInvalidModel, "decision model has no failure model");
  if (failure_->top_failure.size() != n) {
    throw Error(ErrorCode::kInvalidModel, "failure model does not match the health space");
  }
  if (classifier_.prior().size() != n) {
    throw Error(ErrorCode::kInvalidModel, "classifier does not match the health space");
  }
  std::set<std::string> ids;
  for (const auto& a : actions_) {
    if (!ids.insert(a).second) {
      throw Error(ErrorCode::kInvalidModel, "action '" + a + "' declared twice");
    }
  }
  if (transition_.action_count() != actions_.size()) {
    throw Error(ErrorCode::kInvalidModel, "transition model does not cover the action domain");
  }
  if (transition_.is_dense()) {
    for (std::size_t a = 0; a < actions_.size(); ++a) {
      if (transition_.joint(a).rows() != n) {
        throw Error(ErrorCode::kInvalidModel, "transition matrix does not match the health space");
      }
    }
  }
  if (transition_.has_factors() && !actions_.empty()) {
    const auto dims = health_.dims();
    const auto& fs = transition_.factors()[0][0];
    bool ok = fs.size() == dims.size();
    for (std::size_t c = 0; ok && c < dims.size(); ++c) {
      ok = static_cast<std::size_t>(fs[c].rows()) == dims[c];
    }
    if (!ok) {
      throw Error(ErrorCode::kInvalidModel, "component transitions do not match the health space");
    }
  }
  if (utility_.failure_now.size() != 2 || utility_.failure_next.size() != 2 ||
      utility_.action.size() != static_cast<Eigen::Index>(actions_.size())) {
    throw Error(ErrorCode::kInvalidModel, "utility tables do not match their domains");
  }
  if (!utility_.failure_now.allFinite() || !utility_.failure_next.allFinite() ||
      !utility_.action.allFinite()) {
    throw Error(ErrorCode::kInvalidModel, "utility tables must be finite");
  }
}

std::size_t DecisionModel::action_index(std::string_view action) const {
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    if (actions_[i] == action) return i;
  }
  throw Error(ErrorCode::kUnknownAction, "unknown action '" + std::string(action) + "'");
}

DecisionModel DecisionModel::with_utility(UtilityModel utility) const {
  return DecisionModel(health_, classifier_, transition_, failure_, std::move(utility), actions_);
}

DecisionModel DecisionModel::with_transition(TransitionModel transition) const {
  return DecisionModel(health_, classifier_, std::move(transition), failure_, utility_, actions_);
}

DecisionModel DecisionModel::with_classifier(ClassifierModel classifier) const {
  return DecisionModel(health_, std::move(classifier), transition_, failure_, utility_, actions_);
}

// ---------------------------------------------------------------------------
// Operations

Vector condition(const DecisionModel& model, const Vector& belief, std::size_t observation) {
  const auto& c = model.classifier();
  if (observation >= c.symbols().size()) {
    throw Error(ErrorCode::kUnknownObservation,
                "observation index " + std::to_string(observation) + " out of range");
  }
  Vector post = linalg::weigh(belief, c.likelihood(), static_cast<Eigen::Index>(observation));
  if (!linalg::normalize(post)) {
    throw Error(ErrorCode::kInconsistentEvidence,
                "observation '" + c.symbols()[observation] + "' has zero likelihood");
  }
  return post;
}

Vector posterior_health(const DecisionModel& model, std::size_t observation) {
  const auto& c = model.classifier();
  if (c.form() == ClassifierForm::kDiscriminative) {
    if (observation >= c.symbols().size()) {
      throw Error(ErrorCode::kUnknownObservation,
                  "observation index " + std::to_string(observation) + " out of range");
    }
    return c.posterior_table().row(static_cast<Eigen::Index>(observation)).transpose();
  }
  return condition(model, c.prior(), observation);
}

Vector posterior_health(const DecisionModel& model, std::string_view observation) {
  return posterior_health(model, model.observation_index(observation));
}

Vector forecast(const DecisionModel& model, const Vector& belief, std::size_t action) {
  if (action >= model.actions().size()) {
    throw Error(ErrorCode::kUnknownAction, "action index " + std::to_string(action) +
                                               " out of range");
  }
  Vector next = model.transition().propagate(belief, action);
  if (!linalg::normalize(next)) {
    throw Error(ErrorCode::kInvalidModel, "forecast lost all probability mass");
  }
  return next;
}

double expected_utility_given(const DecisionModel& model, const Vector& posterior,
                              std::size_t action) {
  const Vector next = forecast(model, posterior, action);
  return model.utility().action(static_cast<Eigen::Index>(action)) +
         posterior.dot(model.failure_utility_now()) + next.dot(model.failure_utility_next());
}

double expected_utility(const DecisionModel& model, std::size_t observation,
                        std::size_t action) {
  return expected_utility_given(model, posterior_health(model, observation), action);
}

Vector action_values(const DecisionModel& model, const Vector& posterior) {
  Vector v(static_cast<Eigen::Index>(model.actions().size()));
  for (std::size_t a = 0; a < model.actions().size(); ++a) {
    v(static_cast<Eigen::Index>(a)) = expected_utility_given(model, posterior, a);
  }
  return v;
}

std::size_t argmax_first(const Vector& values) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    const double band = kTieTolerance * std::max(1.0, std::abs(values(best)));
    if (values(i) > values(best) + band) best = i;
  }
  return static_cast<std::size_t>(best);
}

Choice solve_given(const DecisionModel& model, const Vector& posterior) {
  if (model.actions().empty()) {
    throw Error(ErrorCode::kEmptyActionDomain, "decision model has no actions");
  }
  const Vector values = action_values(model, posterior);
  const std::size_t best = argmax_first(values);
  return {best, values(static_cast<Eigen::Index>(best))};
}

Choice solve_single_stage(const DecisionModel& model, std::size_t observation) {
  return solve_given(model, posterior_health(model, observation));
}

Choice solve_without_observation(const DecisionModel& model) {
  return solve_given(model, model.classifier().prior());
}

PolicySolution solve_policy(const DecisionModel& model) {
  if (model.actions().empty()) {
    throw Error(ErrorCode::kEmptyActionDomain, "decision model has no actions");
  }
  const auto& c = model.classifier();
  const auto n = static_cast<Eigen::Index>(c.symbols().size());
  PolicySolution out;
  out.symbol_probability = c.predictive(c.prior());
  out.symbol_value = Vector::Zero(n);
  out.policy.action_of.assign(c.symbols().size(), 0);
  for (Eigen::Index v = 0; v < n; ++v) {
    // Symbols that cannot occur carry no weight; every action ties on them.
    if (!(out.symbol_probability(v) > 0.0)) continue;
    const auto choice = solve_single_stage(model, static_cast<std::size_t>(v));
    out.policy.action_of[static_cast<std::size_t>(v)] = choice.action;
    out.symbol_value(v) = choice.value;
    out.value += out.symbol_probability(v) * choice.value;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Agent and rolling horizon

Agent::Agent(std::shared_ptr<const DecisionModel> model, Vector belief)
    : model_(std::move(model)), belief_(std::move(belief)) {
  if (belief_.size() != static_cast<Eigen::Index>(model_->health().size())) {
    throw Error(ErrorCode::kInvalidModel, "initial belief does not match the health space");
  }
  check_distribution(belief_, "initial belief");
  posterior_ = belief_;
}

void Agent::observe(std::size_t observation) {
  try {
    posterior_ = condition(*model_, posterior_, observation);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kInconsistentEvidence) throw;
    const auto n = static_cast<Eigen::Index>(model_->health().size());
    posterior_ = condition(*model_, Vector::Constant(n, 1.0 / static_cast<double>(n)), observation);
  }
}

Choice Agent::decide() const { return solve_given(*model_, posterior_); }

void Agent::commit(std::size_t action) {
  belief_ = forecast(*model_, posterior_, action);
  posterior_ = belief_;
}

void Agent::replace_model(std::shared_ptr<const DecisionModel> model) {
  if (model->health().size() != model_->health().size()) {
    throw Error(ErrorCode::kDomainMismatch, "replacement model has a different health space");
  }
  model_ = std::move(model);
}

std::vector<TrajectoryStep> rolling_horizon(std::shared_ptr<const DecisionModel> model,
                                            const Vector& initial_belief, std::size_t horizon,
                                            Feed& feed) {
  if (horizon < 1) throw Error(ErrorCode::kInvalidConfig, "rolling horizon needs T >= 1");
  Agent agent(std::move(model), initial_belief);
  std::vector<TrajectoryStep> out;
  out.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto obs = feed.observe();
    if (!obs) {
      throw Error(ErrorCode::kFeedExhausted,
                  "feed ran out after " + std::to_string(t) + " of " + std::to_string(horizon) +
                      " steps");
    }
    agent.observe(*obs);
    const Choice choice = agent.decide();
    TrajectoryStep step;
    step.step = t;
    step.observation = *obs;
    step.action = choice.action;
    step.expected_utility = choice.value;
    step.posterior = agent.posterior();
    step.realized_utility = feed.apply(choice.action);
    agent.commit(choice.action);
    step.next_belief = agent.belief();
    out.push_back(std::move(step));
  }
  return out;
}

ScriptedFeed::ScriptedFeed(std::vector<std::size_t> observations,
                           std::vector<double> utility_per_action)
    : observations_(std::move(observations)), utility_(std::move(utility_per_action)) {}

std::optional<std::size_t> ScriptedFeed::observe() {
  if (next_ >= observations_.size()) return std::nullopt;
  return observations_[next_++];
}

double ScriptedFeed::apply(std::size_t action) { return utility_.at(action); }

}  // namespace riskdesk::decision
