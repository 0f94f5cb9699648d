#include "riskdesk/service.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "riskdesk/decision.hpp"
#include "riskdesk/error.hpp"
#include "riskdesk/hierarchy.hpp"
#include "riskdesk/scenario.hpp"
#include "riskdesk/sim.hpp"
#include "riskdesk/voi.hpp"

// After Eigen: resolv.h defines a _res macro that clashes with Eigen internals.
#include "httplib.h"

namespace riskdesk::service {

namespace fs = std::filesystem;
using decision::Vector;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

[[noreturn]] void http_fail(int status, std::string code, std::string message) {
  throw HttpError{status, std::move(code), std::move(message)};
}

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ojson vector_json(const Vector& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// P(at least k of the independent events occur).
double at_least(const std::vector<double>& p, std::size_t k) {
  std::vector<double> dist(p.size() + 1, 0.0);
  dist[0] = 1.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = i + 1; j > 0; --j) dist[j] = dist[j] * (1.0 - p[i]) + dist[j - 1] * p[i];
    dist[0] *= 1.0 - p[i];
  }
  double s = 0.0;
  for (std::size_t j = k; j < dist.size(); ++j) s += dist[j];
  return s;
}

const std::string& required_string(const json& body, const char* key) {
  if (!body.contains(key) || !body.at(key).is_string()) {
    http_fail(400, "bad-request", std::string("missing string field '") + key + "'");
  }
  return body.at(key).get_ref<const std::string&>();
}

}  // namespace

class Session {
 public:
  Session(std::string id, const json& created, fs::path dir)
      : id_(std::move(id)), dir_(std::move(dir)), created_(created) {
    if (created.contains("scenario_path")) {
      scenario_ = std::make_shared<const scenario::Scenario>(
          scenario::Scenario::load(created.at("scenario_path").get<std::string>()));
    } else {
      scenario_ = std::make_shared<const scenario::Scenario>(scenario::Scenario::from_json(
          created.at("scenario"), created.at("base_dir").get<std::string>()));
    }
    seed_ = created.contains("seed") ? created.at("seed").get<std::uint64_t>() : scenario_->seed();
    world_ = std::make_shared<const sim::World>(sim::generate_population(scenario_, seed_));
    truth_ = std::make_unique<sim::GroundTruth>(world_, seed_);
    for (const auto& m : world_->members) {
      Track t;
      t.model = world_->type_of(m.structure).believed;
      t.belief = t.model->classifier().prior();
      t.posterior = t.belief;
      tracks_.emplace(m.structure, std::move(t));
    }
    updated_ = created.value("time", "");
  }

  const std::string& id() const { return id_; }
  std::shared_mutex& mutex() { return mutex_; }

  void persist(const ojson& event) {
    fs::create_directories(dir_);
    std::ofstream out(dir_ / "events.jsonl", std::ios::app);
    out << event.dump() << '\n';
    if (!out) throw Error(ErrorCode::kIo, "cannot append to session log for '" + id_ + "'");
  }

  ojson summary() const {
    ojson j;
    j["session_id"] = id_;
    j["scenario"] = scenario_->name();
    j["seed"] = seed_;
    j["structures"] = world_->members.size();
    j["created"] = created_.value("time", "");
    j["updated"] = updated_;
    return j;
  }

  // Mutations. `event` is the persisted form; replay feeds the same objects.
  ojson evidence(const json& event) {
    auto& t = track(required_string(event, "structure"));
    const auto obs = symbol(t, required_string(event, "obs"));
    Vector post = t.fresh ? decision::posterior_health(*t.model, obs)
                          : decision::condition(*t.model, t.posterior, obs);
    t.posterior = std::move(post);
    t.fresh = false;
    t.evidence.push_back(event.at("obs").get<std::string>());
    touch(event);
    return posterior(event.at("structure").get<std::string>());
  }

  ojson commit(const json& event) {
    const auto& id = required_string(event, "structure");
    auto& t = track(id);
    const auto action = action_index(t, required_string(event, "action"));
    const double eu = decision::expected_utility_given(*t.model, t.posterior, action);
    const auto outcome = truth_->step_structure(id, action);
    t.belief = decision::forecast(*t.model, t.posterior, action);
    t.posterior = t.belief;
    t.fresh = false;
    const auto& type = world_->type_of(id);
    ojson rec;
    rec["step"] = outcome.step;
    rec["structure"] = id;
    rec["env"] = scenario_->environment().states[outcome.environment];
    rec["state"] = type.health.label(outcome.state);
    rec["evidence"] = t.evidence;
    rec["action"] = scenario_->actions()[action].id;
    rec["expected_utility"] = eu;
    rec["utility"] = outcome.utility;
    rec["next_state"] = type.health.label(outcome.next_state);
    rec["failed"] = outcome.failed;
    rec["next_obs"] = type.truth.classifier.symbols()[truth_->observe(id)];
    t.evidence.clear();
    log_.push_back(rec);
    touch(event);
    return rec;
  }

  // Reads.
  ojson posterior(const std::string& id) const {
    const auto& t = track(id);
    ojson j;
    j["structure"] = id;
    j["labels"] = labels(*t.model);
    j["belief"] = vector_json(t.posterior);
    j["prior_belief"] = vector_json(t.belief);
    j["evidence"] = t.evidence;
    j["failure"] = failure_json(*t.model, t.posterior);
    j["population_failure"] = population_failure(world_->hierarchy.root());
    return j;
  }

  ojson whatif(const json& body) const {
    const auto& id = required_string(body, "structure");
    const auto& t = track(id);
    const auto values = decision::action_values(*t.model, t.posterior);
    const auto best = decision::argmax_first(values);
    ojson j;
    j["structure"] = id;
    ojson eu;
    for (std::size_t a = 0; a < t.model->actions().size(); ++a) {
      eu[t.model->actions()[a]] = values(static_cast<Eigen::Index>(a));
    }
    j["expected_utility"] = eu;
    j["best_action"] = t.model->actions()[best];
    std::vector<std::size_t> actions;
    if (body.contains("action")) {
      actions.push_back(action_index(t, required_string(body, "action")));
    } else {
      for (std::size_t a = 0; a < t.model->actions().size(); ++a) actions.push_back(a);
    }
    ojson forecasts;
    for (auto a : actions) {
      forecasts[t.model->actions()[a]] =
          failure_json(*t.model, decision::forecast(*t.model, t.posterior, a));
    }
    j["forecast"] = forecasts;
    return j;
  }

  ojson hierarchy() const { return node_json(world_->hierarchy.root()); }

  ojson voi(const Query& q) const {
    const auto kind = q.contains("kind") ? q.at("kind") : "obs";
    if (kind == "obs") {
      const auto id = structure_param(q);
      auto r = voi::voi_observation(*track(id).model);
      r.seed = seed_;
      auto j = voi::to_json(r);
      j["structure"] = id;
      return j;
    }
    if (kind == "transfer") {
      scenario::TransferSpec spec = scenario_->transfer().value_or(scenario::TransferSpec{});
      if (q.contains("source")) spec.source = q.at("source");
      if (q.contains("target")) spec.target = q.at("target");
      if (q.contains("trials")) spec.trials = std::stoul(q.at("trials"));
      if (spec.source.empty() || spec.target.empty()) {
        http_fail(400, "bad-request", "transfer VoI needs source and target structures");
      }
      const auto transfer = voi::apply_transfer(*world_, spec);
      const auto horizon = q.contains("horizon") ? std::stoul(q.at("horizon"))
                                                 : std::max<std::size_t>(1, scenario_->horizon());
      auto j = voi::to_json(voi::voi_transfer(world_->type_of(spec.target).believed,
                                              transfer.informed, world_, spec.target, horizon,
                                              spec.trials, seed_));
      j["source"] = spec.source;
      j["target"] = spec.target;
      j["jaccard"] = transfer.proposal.eligibility.jaccard;
      return j;
    }
    http_fail(400, "bad-request", "unknown VoI kind '" + kind + "'");
  }

  ojson log() const {
    ojson j;
    j["session_id"] = id_;
    j["records"] = log_;
    return j;
  }

 private:
  struct Track {
    std::shared_ptr<const decision::DecisionModel> model;
    Vector belief;
    Vector posterior;
    std::vector<std::string> evidence;
    bool fresh = true;  // still at the model prior
  };

  void touch(const json& event) { updated_ = event.value("time", updated_); }

  Track& track(const std::string& id) {
    auto it = tracks_.find(id);
    if (it == tracks_.end()) http_fail(404, "unknown-structure", "no structure '" + id + "'");
    return it->second;
  }
  const Track& track(const std::string& id) const {
    return const_cast<Session*>(this)->track(id);
  }

  std::string structure_param(const Query& q) const {
    if (q.contains("structure")) return q.at("structure");
    if (world_->members.size() == 1) return world_->members.front().structure;
    http_fail(400, "bad-request", "query parameter 'structure' is required");
  }

  static std::size_t symbol(const Track& t, const std::string& obs) {
    return t.model->observation_index(obs);
  }
  static std::size_t action_index(const Track& t, const std::string& action) {
    return t.model->action_index(action);
  }

  static ojson labels(const decision::DecisionModel& m) {
    ojson a = ojson::array();
    for (std::size_t h = 0; h < m.health().size(); ++h) a.push_back(m.health().label(h));
    return a;
  }

  static ojson failure_json(const decision::DecisionModel& m, const Vector& belief) {
    const auto& f = m.failure();
    ojson j;
    j["structure"] = belief.dot(f.top_failure);
    ojson nodes;
    for (const auto& [id, v] : f.node_failure) nodes[id] = belief.dot(v);
    j["nodes"] = nodes;
    return j;
  }

  double structure_failure(const std::string& id) const {
    const auto& t = track(id);
    return t.posterior.dot(t.model->failure().top_failure);
  }

  ojson population_failure(const std::string& node) const {
    const auto members = world_->hierarchy.structures(node);
    std::vector<double> p;
    double expected = 0.0;
    for (const auto& s : members) {
      p.push_back(structure_failure(s));
      expected += p.back();
    }
    const auto k = hierarchy::failure_count_threshold(scenario_->availability_threshold(),
                                                      members.size());
    ojson j;
    j["members"] = members.size();
    j["k"] = k;
    j["expected_failed"] = expected;
    j["probability"] = at_least(p, k);
    return j;
  }

  ojson node_json(const std::string& id) const {
    const auto& n = world_->hierarchy.node(id);
    ojson j;
    j["id"] = n.id;
    j["level"] = hierarchy::to_string(n.level);
    j["kind"] = hierarchy::to_string(n.kind);
    if (!n.type_tag.empty()) j["type_tag"] = n.type_tag;
    if (n.level == hierarchy::Level::kS3) {
      j["failure_probability"] = structure_failure(id);
    } else if (n.level > hierarchy::Level::kS3) {
      const auto pop = population_failure(id);
      j["failure_probability"] = pop.at("probability");
      j["k"] = pop.at("k");
      j["expected_failed"] = pop.at("expected_failed");
    } else if (n.health_variable) {
      // Components and substructures sit below exactly one structure.
      std::string s = id;
      while (world_->hierarchy.node(s).level != hierarchy::Level::kS3) {
        s = *world_->hierarchy.parent(s);
      }
      const auto& t = track(s);
      const auto& f = t.model->failure();
      std::optional<double> p;
      auto it = f.node_failure.find(*n.health_variable);
      if (it != f.node_failure.end()) p = t.posterior.dot(it->second);
      for (const auto& e : f.tree.events) {
        if (!p && e.binding.variable == *n.health_variable) {
          p = t.posterior.dot(f.node_failure.at(e.id));
        }
      }
      if (p) j["failure_probability"] = *p;
    }
    if (!n.children.empty()) {
      ojson kids = ojson::array();
      for (const auto& c : n.children) kids.push_back(node_json(c));
      j["children"] = kids;
    }
    return j;
  }

  std::string id_;
  fs::path dir_;
  json created_;
  std::string updated_;
  std::shared_ptr<const scenario::Scenario> scenario_;
  std::uint64_t seed_ = 0;
  std::shared_ptr<const sim::World> world_;
  std::unique_ptr<sim::GroundTruth> truth_;
  std::map<std::string, Track> tracks_;
  ojson log_ = ojson::array();
  std::shared_mutex mutex_;
};

SessionStore::SessionStore(fs::path data_dir, std::optional<fs::path> default_scenario)
    : data_dir_(std::move(data_dir)), default_scenario_(std::move(default_scenario)) {}

SessionStore::~SessionStore() = default;

std::size_t SessionStore::size() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

std::shared_ptr<Session> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) http_fail(404, "unknown-session", "no session '" + id + "'");
  return it->second;
}

std::size_t SessionStore::restore() {
  const auto root = data_dir_ / "sessions";
  if (!fs::exists(root)) return 0;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "events.jsonl")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  std::unique_lock lock(mutex_);
  for (const auto& dir : dirs) {
    std::ifstream in(dir / "events.jsonl");
    std::string line;
    std::shared_ptr<Session> s;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto event = json::parse(line);
      const auto type = event.at("event").get<std::string>();
      if (type == "created") {
        s = std::make_shared<Session>(event.at("session").get<std::string>(), event, dir);
      } else if (!s) {
        throw Error(ErrorCode::kIo, (dir / "events.jsonl").string() + " does not open with 'created'");
      } else if (type == "evidence") {
        s->evidence(event);
      } else if (type == "commit") {
        s->commit(event);
      }
    }
    if (s) sessions_[s->id()] = s;
  }
  return sessions_.size();
}

Response SessionStore::handle(const std::string& method, const std::string& path,
                              const Query& query, const std::string& body) {
  try {
    std::vector<std::string> parts;
    std::stringstream ss(path);
    for (std::string p; std::getline(ss, p, '/');) {
      if (!p.empty()) parts.push_back(p);
    }
    json in = json::object();
    if (!body.empty()) {
      try {
        in = json::parse(body);
      } catch (const json::exception& e) {
        http_fail(400, "bad-request", std::string("malformed JSON body: ") + e.what());
      }
    }
    if (parts.empty() || parts[0] != "sessions") http_fail(404, "not-found", "no route " + path);

    if (parts.size() == 1) {
      if (method == "GET") {
        std::shared_lock lock(mutex_);
        ojson list = ojson::array();
        for (const auto& [id, s] : sessions_) list.push_back(s->summary());
        return {200, list};
      }
      if (method != "POST") http_fail(405, "method-not-allowed", method + " " + path);
      json created;
      created["event"] = "created";
      if (in.contains("scenario") && in.at("scenario").is_object()) {
        created["scenario"] = in.at("scenario");
        created["base_dir"] = fs::absolute(in.value("base_dir", ".")).string();
      } else if (in.contains("scenario")) {
        created["scenario_path"] = fs::absolute(in.at("scenario").get<std::string>()).string();
      } else if (default_scenario_) {
        created["scenario_path"] = fs::absolute(*default_scenario_).string();
      } else {
        http_fail(400, "bad-request", "no scenario given and the service has no default");
      }
      if (in.contains("seed")) created["seed"] = in.at("seed").get<std::uint64_t>();
      created["time"] = now_iso();
      std::unique_lock lock(mutex_);
      std::random_device rd;
      std::ostringstream id;
      id << std::hex << (static_cast<std::uint64_t>(rd()) << 32 ^ rd() ^ ++counter_);
      created["session"] = id.str();
      auto s = std::make_shared<Session>(id.str(), created, data_dir_ / "sessions" / id.str());
      s->persist(created);
      sessions_[id.str()] = s;
      return {201, s->summary()};
    }

    auto s = find(parts[1]);
    const std::string what = parts.size() > 2 ? parts[2] : "";
    if (parts.size() > 3) http_fail(404, "not-found", "no route " + path);
    if (method == "GET") {
      std::shared_lock lock(s->mutex());
      if (what.empty()) return {200, s->summary()};
      if (what == "hierarchy") return {200, s->hierarchy()};
      if (what == "posterior") {
        if (!query.contains("structure")) {
          http_fail(400, "bad-request", "query parameter 'structure' is required");
        }
        return {200, s->posterior(query.at("structure"))};
      }
      if (what == "voi") return {200, s->voi(query)};
      if (what == "log") return {200, s->log()};
    } else if (method == "POST") {
      if (what == "whatif") {
        std::shared_lock lock(s->mutex());
        return {200, s->whatif(in)};
      }
      if (what == "evidence" || what == "commit") {
        std::unique_lock lock(s->mutex());
        json event = in;
        event["event"] = what;
        event["time"] = now_iso();
        auto out = what == "evidence" ? s->evidence(event) : s->commit(event);
        s->persist(event);
        return {200, out};
      }
    }
    http_fail(404, "not-found", "no route " + method + " " + path);
  } catch (const HttpError& e) {
    ojson j;
    j["error"] = e.code;
    j["message"] = e.message;
    return {e.status, j};
  } catch (const Error& e) {
    ojson j;
    j["error"] = to_string(e.code());
    j["message"] = e.what();
    const bool missing = e.code() == ErrorCode::kUnknownVariable ||
                         e.code() == ErrorCode::kUnknownStructure;
    return {missing ? 404 : 400, j};
  } catch (const std::exception& e) {
    ojson j;
    j["error"] = "internal";
    j["message"] = e.what();
    return {500, j};
  }
}

fs::path default_data_dir() {
  if (const char* env = std::getenv("RISKDESK_DATA_DIR"); env && *env) return env;
  return fs::current_path() / "riskdesk-data";
}

int serve(int port, const std::optional<fs::path>& scenario, const fs::path& data_dir,
          const std::string& host) {
  SessionStore store(data_dir, scenario);
  store.restore();
  httplib::Server server;
  // The library default adds SO_REUSEPORT, which lets a second server share
  // a port that is already in use.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  auto dispatch = [&](const httplib::Request& req, httplib::Response& res) {
    Query q;
    for (const auto& [k, v] : req.params) q[k] = v;
    const auto out = store.handle(req.method, req.path, q, req.body);
    res.status = out.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(out.body.dump(), "application/json");
  };
  server.Get(".*", dispatch);
  server.Post(".*", dispatch);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.status = 204;
  });
  if (!server.bind_to_port(host, port)) return 1;
  return server.listen_after_bind() ? 0 : 1;
}

}  // namespace riskdesk::service
