#include "riskdesk/scenario.hpp"

#include <fstream>
#include <sstream>

#include "riskdesk/error.hpp"

namespace riskdesk::scenario {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); }

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Components `j` leaves out take `fallback` when given, else never degrade.
std::vector<std::vector<Matrix>> parse_degradation(
    const nlohmann::json& j, const TypeModel& type, const EnvironmentSpec& env,
    const std::vector<std::vector<Matrix>>* fallback = nullptr) {
  const auto ids = type.component_ids();
  std::vector<std::vector<Matrix>> out(env.states.size());
  for (std::size_t c = 0; c < ids.size(); ++c) {
    const auto n = static_cast<Eigen::Index>(type.component(ids[c]).states.size());
    for (std::size_t e = 0; e < env.states.size(); ++e) {
      Matrix m = fallback ? (*fallback)[e][c] : Matrix::Identity(n, n);
      if (j.contains(ids[c])) {
        const auto& spec = j.at(ids[c]);
        if (spec.is_object()) {
          if (!spec.contains(env.states[e])) {
            bad("degradation of '" + ids[c] + "' lacks environment '" + env.states[e] + "'");
          }
          m = matrix_from_json(spec.at(env.states[e]));
        } else {
          m = matrix_from_json(spec);
        }
      }
      if (m.rows() != n || m.cols() != n) {
        bad("degradation of '" + ids[c] + "' must be " + std::to_string(n) + "x" +
            std::to_string(n));
      }
      out[e].push_back(std::move(m));
    }
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(ids.begin(), ids.end(), it.key()) == ids.end()) {
      bad("degradation names unknown component '" + it.key() + "'");
    }
  }
  return out;
}

Vector parse_prior(const nlohmann::json& j, const decision::HealthStateSpace& health) {
  const auto n = static_cast<Eigen::Index>(health.size());
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "uniform") return Vector::Constant(n, 1.0 / static_cast<double>(n));
    if (s == "healthy") {
      Vector v = Vector::Zero(n);
      v(0) = 1.0;
      return v;
    }
    bad("unknown prior '" + s + "'");
  }
  Vector v = vector_from_json(j);
  if (v.size() != n) bad("prior must have one entry per joint health state");
  return v;
}

decision::ClassifierModel parse_classifier(const nlohmann::json& j,
                                           const decision::HealthStateSpace& health,
                                           const Vector& prior) {
  const auto n = static_cast<Eigen::Index>(health.size());
  if (j.value("form", "generative") == "discriminative") {
    return decision::ClassifierModel::discriminative(
        j.at("symbols").get<std::vector<std::string>>(), matrix_from_json(j.at("posterior")),
        vector_from_json(j.at("symbol_prior")));
  }
  if (j.contains("likelihood")) {
    return decision::ClassifierModel::generative(j.at("symbols").get<std::vector<std::string>>(),
                                                 prior, matrix_from_json(j.at("likelihood")));
  }
  const double acc = j.value("accuracy", 1.0);
  if (!(acc >= 0.0 && acc <= 1.0)) bad("classifier accuracy must be in [0, 1]");
  std::vector<std::string> symbols;
  for (std::size_t h = 0; h < health.size(); ++h) symbols.push_back(health.label(h));
  Matrix lik(n, n);
  const double off = n > 1 ? (1.0 - acc) / static_cast<double>(n - 1) : 0.0;
  lik.setConstant(off);
  lik.diagonal().setConstant(acc);
  return decision::ClassifierModel::generative(std::move(symbols), prior, std::move(lik));
}

}  // namespace

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) bad("empty matrix");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) bad("ragged matrix");
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix mix_uniform(const Matrix& m, double rate) {
  const double u = 1.0 / static_cast<double>(m.cols());
  return (1.0 - rate) * m + Matrix::Constant(m.rows(), m.cols(), rate * u);
}

Vector EnvironmentSpec::stationary() const {
  const auto n = transition.rows();
  // pi (P - I) = 0 with the last equation replaced by sum(pi) = 1.
  Matrix a = transition.transpose() - Matrix::Identity(n, n);
  a.row(n - 1).setOnes();
  Vector b = Vector::Zero(n);
  b(n - 1) = 1.0;
  Vector pi = a.colPivHouseholderQr().solve(b);
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

std::vector<std::string> TypeModel::component_ids() const {
  std::vector<std::string> ids;
  for (const auto& s : substructures) {
    for (const auto& c : s.components) ids.push_back(c.id);
  }
  return ids;
}

const ComponentSpec& TypeModel::component(const std::string& id) const {
  for (const auto& s : substructures) {
    for (const auto& c : s.components) {
      if (c.id == id) return c;
    }
  }
  throw Error(ErrorCode::kUnknownVariable, "type '" + name + "' has no component '" + id + "'");
}

Scenario Scenario::from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  Scenario s;
  try {
    s.source_ = doc;
    if (doc.contains("format") && doc.at("format") != "riskdesk.scenario") {
      bad("not a riskdesk scenario document");
    }
    s.name_ = doc.value("name", "scenario");
    s.seed_ = doc.value("seed", std::uint64_t{0});
    s.horizon_ = doc.value("horizon", std::size_t{0});
    s.availability_threshold_ = doc.value("availability_threshold", 0.99);
    s.transfer_threshold_ = doc.value("transfer_threshold", 0.5);
    s.perturbation_ = doc.value("perturbation", 0.0);
    s.policy_ = doc.value("policy", "meu");
    s.start_healthy_ = doc.value("initial_belief", "healthy") == "healthy";
    if (!(s.availability_threshold_ > 0.0 && s.availability_threshold_ <= 1.0)) {
      bad("availability_threshold must be in (0, 1]");
    }
    if (s.perturbation_ < 0.0 || s.perturbation_ > 1.0) bad("perturbation must be in [0, 1]");

    if (doc.contains("environment")) {
      const auto& e = doc.at("environment");
      s.environment_.id = e.value("id", "environment");
      s.environment_.states = e.at("states").get<std::vector<std::string>>();
      s.environment_.transition = matrix_from_json(e.at("transition"));
      const auto n = static_cast<Eigen::Index>(s.environment_.states.size());
      if (s.environment_.transition.rows() != n || s.environment_.transition.cols() != n) {
        bad("environment transition must be square over its states");
      }
      for (Eigen::Index r = 0; r < n; ++r) {
        if (std::abs(s.environment_.transition.row(r).sum() - 1.0) > pgm::kProbabilityTolerance ||
            s.environment_.transition.row(r).minCoeff() < 0.0) {
          bad("environment transition rows must be distributions");
        }
      }
      const auto init = e.value("initial", s.environment_.states.front());
      auto it = std::find(s.environment_.states.begin(), s.environment_.states.end(), init);
      if (it == s.environment_.states.end()) bad("unknown initial environment '" + init + "'");
      s.environment_.initial = static_cast<std::size_t>(it - s.environment_.states.begin());
    }

    for (const auto& a : doc.at("actions")) {
      ActionSpec spec;
      spec.id = a.at("id").get<std::string>();
      spec.cost = a.value("cost", 0.0);
      for (const auto& r : a.value("resets", std::vector<std::string>{})) {
        if (r == "*") {
          spec.resets_all = true;
        } else {
          spec.resets.insert(r);
        }
      }
      s.actions_.push_back(std::move(spec));
    }
    if (s.actions_.empty()) bad("scenario declares no actions");

    const auto& u = doc.at("utilities");
    auto failure_table = [&](const nlohmann::json& t) {
      Vector v(2);
      v << t.value("ok", 0.0), t.value("failed", 0.0);
      return v;
    };
    s.utility_.failure_next = failure_table(u.at("failure"));
    s.utility_.failure_now =
        u.contains("failure_now") ? failure_table(u.at("failure_now")) : s.utility_.failure_next;
    s.utility_.action.resize(static_cast<Eigen::Index>(s.actions_.size()));
    for (std::size_t i = 0; i < s.actions_.size(); ++i) {
      s.utility_.action(static_cast<Eigen::Index>(i)) = s.actions_[i].cost;
    }

    for (auto it = doc.at("types").begin(); it != doc.at("types").end(); ++it) {
      const auto& t = it.value();
      TypeModel type;
      type.name = it.key();
      std::vector<decision::HealthComponent> comps;
      for (const auto& sj : t.at("substructures")) {
        SubstructureSpec sub;
        sub.id = sj.at("id").get<std::string>();
        sub.type_tag = sj.value("type_tag", "");
        for (const auto& cj : sj.at("components")) {
          ComponentSpec c;
          c.id = cj.at("id").get<std::string>();
          c.type_tag = cj.value("type_tag", "");
          c.joint = cj.value("kind", "component") == "joint";
          if (cj.contains("states")) c.states = cj.at("states").get<std::vector<std::string>>();
          comps.push_back({c.id, c.states});
          sub.components.push_back(std::move(c));
        }
        type.substructures.push_back(std::move(sub));
      }
      type.health = decision::HealthStateSpace(std::move(comps));
      std::string tree_text;
      if (t.contains("fault_tree_text")) {
        tree_text = t.at("fault_tree_text").get<std::string>();
      } else {
        tree_text = read_text(base_dir / t.at("fault_tree").get<std::string>());
      }
      type.failure = std::make_shared<const decision::FailureModel>(
          decision::FailureModel::compile(type.health, fault_tree::parse_fault_tree(tree_text)));
      const Vector prior = parse_prior(t.value("prior", nlohmann::json("uniform")), type.health);
      const auto& truth = t.at("truth");
      type.truth.degradation =
          parse_degradation(truth.value("degradation", nlohmann::json::object()), type,
                            s.environment_);
      type.truth.classifier = parse_classifier(
          truth.value("classifier", nlohmann::json::object()), type.health, prior);
      type.belief = type.truth;
      if (t.contains("belief")) {
        const auto& b = t.at("belief");
        if (b.contains("degradation")) {
          type.belief.degradation =
              parse_degradation(b.at("degradation"), type, s.environment_, &type.truth.degradation);
        }
        if (b.contains("classifier")) {
          type.belief.classifier = parse_classifier(b.at("classifier"), type.health, prior);
        }
      }
      type.believed = s.build_model(type, type.belief.degradation, type.belief.classifier);
      s.types_.emplace(type.name, std::move(type));
    }

    for (const auto& a : s.actions_) {
      for (const auto& r : a.resets) {
        bool known = false;
        for (const auto& [name, type] : s.types_) {
          for (const auto& c : type.component_ids()) known = known || c == r;
        }
        if (!known) bad("action '" + a.id + "' resets unknown component '" + r + "'");
      }
    }

    if (doc.contains("hierarchy")) {
      s.hierarchy_file_ = base_dir / doc.at("hierarchy").get<std::string>();
    }
    if (doc.contains("population")) {
      const auto& p = doc.at("population");
      s.population_.inventory = p.value("inventory", "inventory");
      for (const auto& gj : p.at("groups")) {
        GroupSpec g;
        g.id = gj.at("id").get<std::string>();
        g.merged = gj.value("merged", false);
        if (gj.contains("shared_environment")) {
          g.shared_environment = gj.at("shared_environment").get<std::string>();
        }
        for (const auto& fj : gj.at("farms")) {
          FarmSpec f;
          f.id = fj.at("id").get<std::string>();
          f.type = fj.at("type").get<std::string>();
          f.size = fj.value("size", std::size_t{1});
          if (fj.contains("shared_environment")) {
            f.shared_environment = fj.at("shared_environment").get<std::string>();
          }
          if (!s.types_.contains(f.type)) bad("farm '" + f.id + "' uses unknown type '" + f.type + "'");
          g.farms.push_back(std::move(f));
        }
        if (g.merged && g.farms.size() != 1) {
          bad("merged group '" + g.id + "' must hold exactly one type inventory");
        }
        s.population_.groups.push_back(std::move(g));
      }
    } else if (!s.hierarchy_file_) {
      bad("scenario needs a population or a hierarchy file");
    }

    if (doc.contains("transfer")) {
      const auto& tj = doc.at("transfer");
      TransferSpec t;
      t.source = tj.at("source").get<std::string>();
      t.target = tj.at("target").get<std::string>();
      t.payload = tj.value("payload", "transition");
      t.scope = tj.value("scope", std::vector<std::string>{});
      t.mechanism = tj.value("mechanism", "copy");
      t.source_weight = tj.value("source_weight", 1.0);
      t.target_weight = tj.value("target_weight", 1.0);
      t.trials = tj.value("trials", std::size_t{200});
      s.transfer_ = std::move(t);
    }
    if (doc.contains("sacrifice")) {
      const auto& sj = doc.at("sacrifice");
      SacrificeSpec sc;
      sc.member = sj.at("member").get<std::string>();
      sc.idle_action = sj.value("idle_action", s.actions_.front().id);
      sc.prior_strength = sj.value("prior_strength", 20.0);
      sc.trials = sj.value("trials", std::size_t{200});
      s.action_index(sc.idle_action);
      s.sacrifice_ = std::move(sc);
    }
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("malformed scenario: ") + e.what());
  }
  return s;
}

Scenario Scenario::load(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    bad(path.string() + ": " + e.what());
  }
  return from_json(doc, path.parent_path());
}

std::vector<std::string> Scenario::action_ids() const {
  std::vector<std::string> ids;
  for (const auto& a : actions_) ids.push_back(a.id);
  return ids;
}

std::size_t Scenario::action_index(const std::string& id) const {
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    if (actions_[i].id == id) return i;
  }
  throw Error(ErrorCode::kUnknownAction, "unknown action '" + id + "'");
}

const TypeModel& Scenario::type(const std::string& name) const {
  auto it = types_.find(name);
  if (it == types_.end()) bad("unknown structure type '" + name + "'");
  return it->second;
}

Matrix Scenario::component_transition(const TypeModel& type, std::size_t component,
                                      std::size_t action, const Matrix& degradation) const {
  const auto& id = type.health.components()[component].variable;
  if (actions_[action].resets_component(id)) {
    Matrix reset = Matrix::Zero(degradation.rows(), degradation.cols());
    reset.col(0).setOnes();
    return reset;
  }
  return degradation;
}

std::shared_ptr<const decision::DecisionModel> Scenario::build_model(
    const TypeModel& type, const std::vector<std::vector<Matrix>>& degradation,
    const decision::ClassifierModel& classifier) const {
  const std::size_t n_env = environment_count();
  const std::size_t n_comp = type.health.components().size();
  std::vector<std::vector<std::vector<Matrix>>> factors(actions_.size());
  for (std::size_t a = 0; a < actions_.size(); ++a) {
    factors[a].resize(n_env);
    for (std::size_t e = 0; e < n_env; ++e) {
      for (std::size_t c = 0; c < n_comp; ++c) {
        factors[a][e].push_back(component_transition(type, c, a, degradation[e][c]));
      }
    }
  }
  std::vector<std::string> envs;
  if (n_env > 1) envs = environment_.states;
  auto transition = decision::TransitionModel::factored(
      std::move(envs), n_env > 1 ? environment_.stationary() : Vector::Ones(1),
      std::move(factors));
  return std::make_shared<const decision::DecisionModel>(type.health, classifier,
                                                         std::move(transition), type.failure,
                                                         utility_, action_ids());
}

Vector Scenario::initial_belief(const TypeModel& type) const {
  if (!start_healthy_) return type.believed->classifier().prior();
  Vector b = Vector::Zero(static_cast<Eigen::Index>(type.health.size()));
  b(0) = 1.0;
  return b;
}

}  // namespace riskdesk::scenario
