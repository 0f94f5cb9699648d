#include "riskdesk/voi.hpp"

#include <cmath>

#include "riskdesk/error.hpp"
#include "riskdesk/rng.hpp"

namespace riskdesk::voi {

namespace {

struct Moments {
  double mean_a = 0.0;
  double mean_b = 0.0;
  double standard_error = 0.0;
};

// Means of paired samples and the standard error of their difference b - a.
Moments paired(const std::vector<double>& a, const std::vector<double>& b) {
  Moments m;
  const auto n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    m.mean_a += a[i];
    m.mean_b += b[i];
  }
  m.mean_a /= n;
  m.mean_b /= n;
  if (a.size() > 1) {
    const double mean_d = m.mean_b - m.mean_a;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = (b[i] - a[i]) - mean_d;
      ss += d * d;
    }
    m.standard_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return m;
}

void check_domains(const decision::DecisionModel& a, const decision::DecisionModel& b) {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kDomainMismatch, "models disagree on their " + what);
  };
  if (a.actions() != b.actions()) fail("actions");
  if (a.classifier().symbols() != b.classifier().symbols()) fail("observation symbols");
  if (a.health().size() != b.health().size()) fail("health states");
  for (std::size_t h = 0; h < a.health().size(); ++h) {
    if (a.health().label(h) != b.health().label(h)) fail("health states");
  }
}

Vector start_belief(const sim::World& world, const decision::DecisionModel& model) {
  if (!world.scenario->start_healthy()) return model.classifier().prior();
  Vector b = Vector::Zero(static_cast<Eigen::Index>(model.health().size()));
  b(0) = 1.0;
  return b;
}

// Target components named by a scope of substructure or component ids.
std::vector<std::string> expand_scope(const scenario::TypeModel& type,
                                      const std::vector<std::string>& scope) {
  if (scope.empty()) return type.component_ids();
  std::vector<std::string> out;
  for (const auto& s : scope) {
    bool found = false;
    for (const auto& sub : type.substructures) {
      if (sub.id == s) {
        for (const auto& c : sub.components) out.push_back(c.id);
        found = true;
      }
    }
    if (!found) {
      type.component(s);
      out.push_back(s);
    }
  }
  return out;
}

std::size_t component_position(const scenario::TypeModel& type, const std::string& id) {
  const auto ids = type.component_ids();
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) {
    throw Error(ErrorCode::kShapeMismatch,
                "type '" + type.name + "' has no component '" + id + "' to receive a transfer");
  }
  return static_cast<std::size_t>(it - ids.begin());
}

}  // namespace

std::string_view to_string(VoiKind kind) {
  switch (kind) {
    case VoiKind::kObservation: return "observation";
    case VoiKind::kTransfer: return "transfer";
    case VoiKind::kFailureData: return "failure_data";
  }
  return "?";
}

nlohmann::ordered_json to_json(const VoiReport& r) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(r.kind);
  j["value"] = r.value;
  j["baseline"] = r.baseline;
  j["informed"] = r.informed;
  j["n"] = r.n;
  j["stderr"] = r.standard_error;
  j["seed"] = r.seed;
  return j;
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) {
  return rng::stream_seed(seed, "trial", trial, rng::Purpose::kTrial);
}

VoiReport voi_observation(const decision::DecisionModel& model) {
  const auto solution = decision::solve_policy(model);
  const auto n_actions = static_cast<Eigen::Index>(model.actions().size());
  Vector pooled = Vector::Zero(n_actions);
  for (Eigen::Index v = 0; v < solution.symbol_probability.size(); ++v) {
    const double p = solution.symbol_probability(v);
    if (!(p > 0.0)) continue;
    const Vector post = decision::posterior_health(model, static_cast<std::size_t>(v));
    pooled += p * decision::action_values(model, post);
  }
  VoiReport r;
  r.kind = VoiKind::kObservation;
  r.informed = solution.value;
  r.baseline = pooled(static_cast<Eigen::Index>(decision::argmax_first(pooled)));
  r.value = r.informed - r.baseline;
  return r;
}

Matrix pool_cpts(const std::vector<Matrix>& members, const std::vector<double>& weights) {
  if (members.empty() || members.size() != weights.size()) {
    throw Error(ErrorCode::kShapeMismatch, "pooling needs one weight per CPT");
  }
  Matrix out = Matrix::Zero(members.front().rows(), members.front().cols());
  double total = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (members[i].rows() != out.rows() || members[i].cols() != out.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "pooled CPTs differ in shape");
    }
    if (!(weights[i] > 0.0)) {
      throw Error(ErrorCode::kInvalidModel, "pooling weights must be positive");
    }
    out += weights[i] * members[i];
    total += weights[i];
  }
  out /= total;
  for (Eigen::Index r = 0; r < out.rows(); ++r) out.row(r) /= out.row(r).sum();
  return out;
}

TransferResult apply_transfer(const sim::World& world, const scenario::TransferSpec& spec) {
  const auto& sc = *world.scenario;
  const auto& h = world.hierarchy;
  const auto gate = hierarchy::transfer_eligible(h, spec.source, spec.target,
                                                 sc.transfer_threshold());
  if (!gate.eligible) {
    throw Error(ErrorCode::kEligibility,
                "transfer from '" + spec.source + "' to '" + spec.target + "' fails the " +
                    "similarity gate (jaccard " + std::to_string(gate.score.jaccard) + " < " +
                    std::to_string(sc.transfer_threshold()) + ")");
  }
  if (spec.mechanism != "copy" && spec.mechanism != "pool") {
    throw Error(ErrorCode::kInvalidConfig, "unknown transfer mechanism '" + spec.mechanism + "'");
  }
  const auto& source = world.type_of(spec.source);
  const auto& target = world.type_of(spec.target);
  TransferResult out;
  out.proposal = {spec.source, spec.target, spec.payload, spec.scope, spec.mechanism, gate.score};
  out.tables = target.belief;
  const bool copy = spec.mechanism == "copy";
  if (spec.payload == "transition") {
    for (const auto& id : expand_scope(target, spec.scope)) {
      const auto ct = component_position(target, id);
      const auto cs = component_position(source, id);
      for (std::size_t e = 0; e < out.tables.degradation.size(); ++e) {
        const Matrix& from = source.belief.degradation[e][cs];
        Matrix& to = out.tables.degradation[e][ct];
        if (from.rows() != to.rows()) {
          throw Error(ErrorCode::kShapeMismatch, "component '" + id + "' differs in states");
        }
        to = copy ? from : pool_cpts({to, from}, {spec.target_weight, spec.source_weight});
      }
    }
  } else if (spec.payload == "classifier") {
    const auto& from = source.belief.classifier;
    const auto& to = target.belief.classifier;
    if (from.symbols() != to.symbols() || from.likelihood().rows() != to.likelihood().rows()) {
      throw Error(ErrorCode::kShapeMismatch, "classifiers differ in shape");
    }
    out.tables.classifier =
        copy ? from
             : decision::ClassifierModel::generative(
                   to.symbols(), to.prior(),
                   pool_cpts({to.likelihood(), from.likelihood()},
                             {spec.target_weight, spec.source_weight}));
  } else {
    throw Error(ErrorCode::kInvalidConfig, "unknown transfer payload '" + spec.payload + "'");
  }
  out.informed = sc.build_model(target, out.tables.degradation, out.tables.classifier);
  return out;
}

VoiReport voi_transfer(std::shared_ptr<const decision::DecisionModel> baseline,
                       std::shared_ptr<const decision::DecisionModel> informed,
                       std::shared_ptr<const sim::World> truth, const std::string& structure,
                       std::size_t horizon, std::size_t trials, std::uint64_t seed) {
  check_domains(*baseline, *informed);
  check_domains(*baseline, *truth->type_of(structure).believed);
  if (trials < 1) throw Error(ErrorCode::kInvalidConfig, "transfer VoI needs at least one trial");
  std::vector<double> base(trials), inf(trials);
  auto run = [&](const std::shared_ptr<const decision::DecisionModel>& model, std::uint64_t s) {
    sim::GroundTruth world(truth, s);
    sim::StructureFeed feed(world, structure);
    double total = 0.0;
    for (const auto& step :
         decision::rolling_horizon(model, start_belief(*truth, *model), horizon, feed)) {
      total += step.realized_utility;
    }
    return total;
  };
  for (std::size_t i = 0; i < trials; ++i) {
    const auto s = trial_seed(seed, i);
    base[i] = run(baseline, s);
    inf[i] = run(informed, s);
  }
  const auto m = paired(base, inf);
  VoiReport r;
  r.kind = VoiKind::kTransfer;
  r.baseline = m.mean_a;
  r.informed = m.mean_b;
  r.value = r.informed - r.baseline;
  r.n = trials;
  r.standard_error = m.standard_error;
  r.seed = seed;
  return r;
}

VoiReport voi_failure_data(std::shared_ptr<const sim::World> world,
                           const scenario::SacrificeSpec& spec, std::size_t horizon,
                           std::size_t trials, std::uint64_t seed) {
  const auto& sc = *world->scenario;
  const auto& victim = world->member(spec.member);
  const auto& type = sc.type(victim.type);
  std::vector<std::string> same_type;
  for (const auto& m : world->members) {
    if (m.type == victim.type) same_type.push_back(m.structure);
  }
  if (same_type.size() < 2) {
    throw Error(ErrorCode::kEligibility,
                "'" + spec.member + "' has no other population member of type '" + victim.type +
                    "' to inform");
  }
  if (trials < 1) throw Error(ErrorCode::kInvalidConfig, "failure-data VoI needs at least one trial");
  const std::size_t idle = sc.action_index(spec.idle_action);
  const std::size_t n_env = sc.environment_count();
  const std::size_t n_comp = type.health.components().size();

  auto total_of = [](const std::vector<sim::StepRecord>& records) {
    double s = 0.0;
    for (const auto& r : records) s += r.outcome.utility;
    return s;
  };

  std::vector<double> maintain(trials), sacrifice(trials);
  for (std::size_t i = 0; i < trials; ++i) {
    const auto s = trial_seed(seed, i);
    sim::Simulation a(world, s);
    double ua = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) ua += total_of(a.advance().first);
    maintain[i] = ua;

    sim::Simulation b(world, s);
    b.force(spec.member, idle);
    const auto victim_index = world->member_index(spec.member);
    std::vector<std::vector<Matrix>> counts(n_env);
    for (auto& per_env : counts) {
      for (std::size_t c = 0; c < n_comp; ++c) {
        const auto k = static_cast<Eigen::Index>(type.health.components()[c].states.size());
        per_env.push_back(Matrix::Zero(k, k));
      }
    }
    bool sacrificed = false;
    double ub = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      const auto records = b.advance().first;
      ub += total_of(records);
      if (sacrificed) continue;
      const auto& o = records[victim_index].outcome;
      const auto before = type.health.decode(o.state);
      const auto after = type.health.decode(o.next_state);
      for (std::size_t c = 0; c < n_comp; ++c) {
        counts[o.environment][c](static_cast<Eigen::Index>(before[c]),
                                 static_cast<Eigen::Index>(after[c])) += 1.0;
      }
      if (!o.failed) continue;
      sacrificed = true;
      b.release(spec.member);
      auto pooled = type.belief.degradation;
      for (std::size_t e = 0; e < n_env; ++e) {
        for (std::size_t c = 0; c < n_comp; ++c) {
          const Matrix& believed = type.belief.degradation[e][c];
          Matrix empirical = believed;
          const double n = counts[e][c].sum();
          if (n == 0.0) continue;
          for (Eigen::Index r = 0; r < empirical.rows(); ++r) {
            const double row = counts[e][c].row(r).sum();
            if (row > 0.0) empirical.row(r) = counts[e][c].row(r) / row;
          }
          pooled[e][c] = pool_cpts({believed, empirical}, {spec.prior_strength, n});
        }
      }
      const auto model = sc.build_model(type, pooled, type.belief.classifier);
      for (const auto& id : same_type) b.agent(id).replace_model(model);
    }
    sacrifice[i] = ub;
  }
  const auto m = paired(maintain, sacrifice);
  VoiReport r;
  r.kind = VoiKind::kFailureData;
  r.baseline = m.mean_a;
  r.informed = m.mean_b;
  r.value = r.informed - r.baseline;
  r.n = trials;
  r.standard_error = m.standard_error;
  r.seed = seed;
  return r;
}

}  // namespace riskdesk::voi
