#include "riskdesk/sim.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <thread>

#include "riskdesk/error.hpp"
#include "riskdesk/rng.hpp"

namespace riskdesk::sim {

namespace {

using hierarchy::HierarchyNode;
using hierarchy::Kind;
using hierarchy::Level;

std::string padded(std::size_t i, std::size_t count) {
  const std::size_t width = std::max<std::size_t>(2, std::to_string(count).size());
  std::string s = std::to_string(i);
  return std::string(width - std::min(width, s.size()), '0') + s;
}

void add_structure(std::vector<HierarchyNode>& nodes, const scenario::TypeModel& type,
                   const std::string& id) {
  std::vector<std::string> gates;
  for (const auto& g : type.failure->tree.gates) gates.push_back(g.id);
  HierarchyNode s{id, Level::kS3, Kind::kStructure, type.name, {}, type.failure->tree.top, false,
                  std::nullopt};
  for (const auto& sub : type.substructures) {
    HierarchyNode n{id + "." + sub.id, Level::kS2, Kind::kSubstructure, sub.type_tag, {},
                    std::nullopt, false, std::nullopt};
    if (std::find(gates.begin(), gates.end(), sub.id) != gates.end()) n.health_variable = sub.id;
    for (const auto& c : sub.components) {
      nodes.push_back({n.id + "." + c.id, Level::kS1, c.joint ? Kind::kJoint : Kind::kComponent,
                       c.type_tag, {}, c.id, false, std::nullopt});
      n.children.push_back(n.id + "." + c.id);
    }
    s.children.push_back(n.id);
    nodes.push_back(std::move(n));
  }
  nodes.push_back(std::move(s));
}

hierarchy::Hierarchy build_hierarchy(const scenario::Scenario& sc) {
  const auto& pop = sc.population();
  std::vector<HierarchyNode> nodes;
  HierarchyNode root{pop.inventory, Level::kS6, Kind::kInventory, "", {}, std::nullopt, false,
                     std::nullopt};
  for (const auto& g : pop.groups) {
    HierarchyNode group{g.id, Level::kS5, Kind::kGroupInventory, "", {}, std::nullopt, g.merged,
                        g.shared_environment};
    for (const auto& f : g.farms) {
      const auto& type = sc.type(f.type);
      std::vector<std::string> structures;
      for (std::size_t i = 1; i <= f.size; ++i) {
        const std::string id = f.id + ".t" + padded(i, f.size);
        add_structure(nodes, type, id);
        structures.push_back(id);
      }
      if (g.merged) {
        group.children = structures;
        if (f.shared_environment) group.shared_environment = f.shared_environment;
      } else {
        nodes.push_back({f.id, Level::kS4, Kind::kTypeInventory, "", structures, std::nullopt,
                         false, f.shared_environment});
        group.children.push_back(f.id);
      }
    }
    root.children.push_back(group.id);
    nodes.push_back(std::move(group));
  }
  const std::string root_id = root.id;
  nodes.push_back(std::move(root));
  return hierarchy::Hierarchy(std::move(nodes), root_id);
}

}  // namespace

std::size_t World::member_index(std::string_view structure) const {
  auto it = index.find(structure);
  if (it == index.end()) {
    throw Error(ErrorCode::kUnknownStructure, "unknown structure '" + std::string(structure) + "'");
  }
  return it->second;
}

const scenario::TypeModel& World::type_of(std::string_view structure) const {
  return scenario->type(member(structure).type);
}

World generate_population(std::shared_ptr<const scenario::Scenario> sc, std::uint64_t seed) {
  World w;
  w.scenario = sc;
  w.hierarchy = sc->hierarchy_file() ? hierarchy::read_hierarchy_file(*sc->hierarchy_file())
                                     : build_hierarchy(*sc);
  const auto violations = hierarchy::validate_hierarchy(w.hierarchy);
  if (!violations.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "generated hierarchy is invalid: " +
                                               violations.front().node + ": " +
                                               violations.front().message);
  }
  std::vector<hierarchy::MemberBinding> bindings;
  for (const auto& id : w.hierarchy.structures(w.hierarchy.root())) {
    const auto& node = w.hierarchy.node(id);
    Member m;
    m.structure = id;
    m.type = node.type_tag;
    const auto& type = sc->type(m.type);
    m.farm = w.hierarchy.parent(id).value_or("");
    m.environment = w.hierarchy.environment_of(id).value_or("private:" + id);
    rng::Stream stream(seed, id, 0, rng::Purpose::kPerturbation);
    m.perturbation = sc->perturbation() * stream.uniform();
    m.degradation = type.truth.degradation;
    if (m.perturbation > 0.0) {
      for (auto& per_env : m.degradation) {
        for (auto& d : per_env) d = scenario::mix_uniform(d, m.perturbation);
      }
    }
    w.index.emplace(id, w.members.size());
    w.members.push_back(std::move(m));
    bindings.push_back({id, id});
  }
  hierarchy::PopulationFailureMode mode{
      "population_failure", w.hierarchy.root(),
      hierarchy::AvailabilityThreshold{sc->availability_threshold()}, "availability"};
  w.population_tree = hierarchy::population_failure_tree(mode, bindings);
  w.failure_count_threshold = static_cast<std::size_t>(w.population_tree.gates.front().k);
  return w;
}

GroundTruth::GroundTruth(std::shared_ptr<const World> world, std::uint64_t seed)
    : world_(std::move(world)), seed_(seed) {
  const auto& sc = *world_->scenario;
  for (const auto& m : world_->members) {
    const auto& type = sc.type(m.type);
    State st;
    st.components.assign(type.health.components().size(), 0);
    if (!sc.start_healthy()) {
      rng::Stream stream(seed_, m.structure, 0, rng::Purpose::kInitial);
      st.components = type.health.decode(stream.categorical(type.truth.classifier.prior()));
    }
    states_.push_back(std::move(st));
    std::vector<bool> table(type.health.size());
    for (std::size_t h = 0; h < type.health.size(); ++h) {
      table[h] = fault_tree::evaluate_states(type.failure->tree, type.health.assignment(h));
    }
    failure_table_.push_back(std::move(table));
    environments_.try_emplace(m.environment, std::vector<std::size_t>{sc.environment().initial});
  }
}

std::size_t GroundTruth::encode(std::size_t member) const {
  return world_->type_of(world_->members[member].structure).health.encode(
      states_[member].components);
}

std::size_t GroundTruth::clock(std::string_view structure) const {
  return states_[world_->member_index(structure)].clock;
}

std::size_t GroundTruth::health(std::string_view structure) const {
  return encode(world_->member_index(structure));
}

const std::vector<std::size_t>& GroundTruth::component_states(std::string_view structure) const {
  return states_[world_->member_index(structure)].components;
}

bool GroundTruth::failed(std::string_view structure) const {
  const auto i = world_->member_index(structure);
  return failure_table_[i][encode(i)];
}

std::size_t GroundTruth::environment(const std::string& key, std::size_t step) {
  auto& path = environments_.at(key);
  const auto& env = world_->scenario->environment();
  while (path.size() <= step) {
    const std::size_t t = path.size();
    rng::Stream stream(seed_, key, t, rng::Purpose::kEnvironment);
    const Vector row = env.transition.row(static_cast<Eigen::Index>(path.back())).transpose();
    path.push_back(stream.categorical(row));
  }
  return path[step];
}

void GroundTruth::extend_environments(std::size_t step) {
  for (auto& [key, path] : environments_) environment(key, step);
}

std::size_t GroundTruth::observe(std::string_view structure) const {
  const auto i = world_->member_index(structure);
  const auto& type = world_->type_of(structure);
  rng::Stream stream(seed_, structure, states_[i].clock, rng::Purpose::kObservation);
  const Vector row =
      type.truth.classifier.likelihood().row(static_cast<Eigen::Index>(encode(i))).transpose();
  return stream.categorical(row);
}

StructureOutcome GroundTruth::step_structure(std::string_view structure, std::size_t action) {
  const auto i = world_->member_index(structure);
  const auto& m = world_->members[i];
  const auto& sc = *world_->scenario;
  const auto& type = sc.type(m.type);
  if (action >= sc.actions().size()) {
    throw Error(ErrorCode::kUnknownAction, "action index " + std::to_string(action) +
                                               " out of range for '" + m.structure + "'");
  }
  auto& st = states_[i];
  StructureOutcome out;
  out.structure = m.structure;
  out.step = st.clock;
  out.action = action;
  out.state = encode(i);
  out.environment = environment(m.environment, st.clock + 1);
  rng::Stream stream(seed_, m.structure, st.clock + 1, rng::Purpose::kTransition);
  for (std::size_t c = 0; c < st.components.size(); ++c) {
    const Matrix t = sc.component_transition(type, c, action, m.degradation[out.environment][c]);
    const Vector row = t.row(static_cast<Eigen::Index>(st.components[c])).transpose();
    st.components[c] = stream.categorical(row);
  }
  ++st.clock;
  out.next_state = encode(i);
  out.failed = failure_table_[i][out.next_state];
  const auto& u = sc.utility();
  out.utility = u.action(static_cast<Eigen::Index>(action)) + u.failure_next(out.failed ? 1 : 0);
  return out;
}

std::vector<StructureOutcome> GroundTruth::step(const std::map<std::string, std::size_t>& actions) {
  for (const auto& [id, a] : actions) world_->member_index(id);
  std::vector<StructureOutcome> out;
  for (const auto& m : world_->members) {
    auto it = actions.find(m.structure);
    if (it == actions.end()) {
      throw Error(ErrorCode::kInvalidConfig, "no action given for '" + m.structure + "'");
    }
    out.push_back(step_structure(m.structure, it->second));
  }
  return out;
}

StructureFeed::StructureFeed(GroundTruth& truth, std::string structure)
    : truth_(truth), structure_(std::move(structure)) {}

std::optional<std::size_t> StructureFeed::observe() { return truth_.observe(structure_); }

double StructureFeed::apply(std::size_t action) {
  return truth_.step_structure(structure_, action).utility;
}

bool population_failed(const World& world, const std::vector<bool>& member_failed) {
  if (member_failed.size() != world.members.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one failure flag per member expected");
  }
  std::map<std::string, bool> events;
  for (std::size_t i = 0; i < world.members.size(); ++i) {
    events.emplace("down." + world.members[i].structure, member_failed[i]);
  }
  return fault_tree::evaluate(world.population_tree, events);
}

Simulation::Simulation(std::shared_ptr<const World> world, std::uint64_t seed, std::string policy,
                       unsigned threads)
    : world_(world), truth_(world, seed), threads_(std::max(1u, threads)) {
  const auto& sc = *world_->scenario;
  if (policy != "meu") fixed_action_ = sc.action_index(policy);
  for (const auto& m : world_->members) {
    const auto& type = sc.type(m.type);
    agents_.emplace_back(type.believed, sc.initial_belief(type));
  }
}

decision::Agent& Simulation::agent(std::string_view structure) {
  return agents_[world_->member_index(structure)];
}

void Simulation::force(std::string_view structure, std::size_t action) {
  world_->member_index(structure);
  if (action >= world_->scenario->actions().size()) {
    throw Error(ErrorCode::kUnknownAction, "action index " + std::to_string(action) + " out of range");
  }
  forced_.insert_or_assign(std::string(structure), action);
}

void Simulation::release(std::string_view structure) {
  auto it = forced_.find(structure);
  if (it != forced_.end()) forced_.erase(it);
}

std::pair<std::vector<StepRecord>, PopulationRecord> Simulation::advance() {
  const auto& members = world_->members;
  std::vector<StepRecord> records(members.size());
  truth_.extend_environments(step_ + 1);
  auto run = [&](std::size_t i) {
    const auto& id = members[i].structure;
    auto& agent = agents_[i];
    StepRecord& r = records[i];
    r.observation = truth_.observe(id);
    agent.observe(r.observation);
    std::size_t action;
    auto forced = forced_.find(id);
    if (forced != forced_.end() || fixed_action_) {
      action = forced != forced_.end() ? forced->second : *fixed_action_;
      r.expected_utility = decision::expected_utility_given(agent.model(), agent.posterior(), action);
    } else {
      const auto choice = agent.decide();
      action = choice.action;
      r.expected_utility = choice.value;
    }
    r.outcome = truth_.step_structure(id, action);
    agent.commit(action);
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads_, members.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < members.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < members.size(); i += workers) run(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  PopulationRecord pop;
  pop.step = step_;
  std::vector<bool> failed(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    failed[i] = records[i].outcome.failed;
    pop.failed_count += failed[i] ? 1 : 0;
  }
  const double n = static_cast<double>(members.size());
  pop.availability = (n - static_cast<double>(pop.failed_count)) / n;
  pop.population_failed = population_failed(*world_, failed);
  ++step_;
  return {std::move(records), pop};
}

ExperimentResult run_experiment(std::shared_ptr<const scenario::Scenario> sc,
                                const ExperimentOptions& options) {
  const std::uint64_t seed = options.seed.value_or(sc->seed());
  const std::size_t horizon = options.horizon.value_or(sc->horizon());
  const std::string policy = options.policy.value_or(sc->policy());
  auto world = std::make_shared<const World>(generate_population(sc, seed));
  Simulation simulation(world, seed, policy, options.threads);
  const auto& env = sc->environment();
  const auto& actions = sc->actions();
  ExperimentResult result;
  double min_availability = 1.0;
  double sum_availability = 0.0;
  std::size_t population_failures = 0;
  for (std::size_t t = 0; t < horizon; ++t) {
    auto [records, pop] = simulation.advance();
    for (const auto& r : records) {
      const auto& type = world->type_of(r.outcome.structure);
      const auto& health = type.health;
      nlohmann::ordered_json j;
      j["record"] = "structure";
      j["step"] = t;
      j["structure"] = r.outcome.structure;
      j["env"] = env.states[r.outcome.environment];
      j["state"] = health.label(r.outcome.state);
      j["obs"] = type.truth.classifier.symbols()[r.observation];
      j["action"] = actions[r.outcome.action].id;
      j["expected_utility"] = r.expected_utility;
      j["utility"] = r.outcome.utility;
      j["next_state"] = health.label(r.outcome.next_state);
      j["failed"] = r.outcome.failed;
      result.total_utility += r.outcome.utility;
      result.log.push_back(std::move(j));
    }
    nlohmann::ordered_json p;
    p["record"] = "population";
    p["step"] = t;
    p["failed_count"] = pop.failed_count;
    p["availability"] = pop.availability;
    p["population_failed"] = pop.population_failed;
    result.log.push_back(std::move(p));
    if (pop.availability < sc->availability_threshold()) ++result.availability_violations;
    if (pop.population_failed) ++population_failures;
    min_availability = std::min(min_availability, pop.availability);
    sum_availability += pop.availability;
  }
  const std::size_t n = world->members.size();
  auto& s = result.summary;
  s["scenario"] = sc->name();
  s["seed"] = seed;
  s["horizon"] = horizon;
  s["structures"] = n;
  s["policy"] = policy;
  s["total_utility"] = result.total_utility;
  s["mean_realized_utility"] = n > 0 ? result.total_utility / static_cast<double>(n) : 0.0;
  s["availability_threshold"] = sc->availability_threshold();
  s["failure_count_threshold"] = world->failure_count_threshold;
  s["availability_violations"] = result.availability_violations;
  s["population_failures"] = population_failures;
  s["min_availability"] = min_availability;
  s["mean_availability"] = horizon > 0 ? sum_availability / static_cast<double>(horizon) : 1.0;
  return result;
}

std::string log_text(const std::vector<nlohmann::ordered_json>& log) {
  std::string out;
  for (const auto& j : log) {
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace riskdesk::sim
