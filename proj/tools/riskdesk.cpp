// riskdesk: compile fault trees, decide, simulate, value information, serve.
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "riskdesk/decision.hpp"
#include "riskdesk/error.hpp"
#include "riskdesk/fault_tree.hpp"
#include "riskdesk/network_io.hpp"
#include "riskdesk/scenario.hpp"
#include "riskdesk/service.hpp"
#include "riskdesk/sim.hpp"
#include "riskdesk/voi.hpp"

namespace fs = std::filesystem;
using namespace riskdesk;
using ojson = nlohmann::ordered_json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

// One record per line: space-separated key=value; doubles in shortest
// round-trip form.
std::string record(const ojson& j) {
  std::string line;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!line.empty()) line += ' ';
    line += it.key() + '=';
    const auto& v = it.value();
    if (v.is_string()) {
      line += v.get<std::string>();
    } else {
      line += v.dump();
    }
  }
  return line + '\n';
}

std::string human(const ojson& j) {
  std::string out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    out += it.key() + ": ";
    out += it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
    out += '\n';
  }
  return out;
}

int compile_cmd(const std::string& tree_path, const std::string& base_path,
                const std::string& out_path) {
  const auto tree = fault_tree::parse_fault_tree(read_text(tree_path));
  const auto base = base_path.empty() ? fault_tree::default_base(tree)
                                      : pgm::read_network_file(base_path);
  const auto net = fault_tree::compile_to_bn(tree, base);
  if (out_path.empty()) {
    std::cout << pgm::dump_network(net);
  } else {
    pgm::write_network_file(out_path, net);
  }
  return 0;
}

int decide_cmd(const std::string& scenario_path, const std::vector<std::string>& obs,
               const std::string& format) {
  auto sc = std::make_shared<const scenario::Scenario>(scenario::Scenario::load(scenario_path));
  const auto world = sim::generate_population(sc, sc->seed());
  std::map<std::string, std::string> given;
  for (const auto& o : obs) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == o.size()) {
      throw Error(ErrorCode::kUnknownObservation, "expected <structure|type|*>=<symbol>, got '" + o + "'");
    }
    const auto key = o.substr(0, eq);
    if (key != "*" && !world.index.contains(key) && !sc->types().contains(key)) {
      throw Error(ErrorCode::kUnknownVariable, "'" + key + "' is neither a structure nor a type");
    }
    given[key] = o.substr(eq + 1);
  }
  std::string out;
  if (format == "human") out += "structure\tobs\taction\tmeu\n";
  for (const auto& m : world.members) {
    const auto& model = *world.type_of(m.structure).believed;
    std::optional<std::string> symbol;
    for (const auto& key : {m.structure, m.type, std::string("*")}) {
      if (!symbol && given.contains(key)) symbol = given.at(key);
    }
    const auto choice = symbol ? decision::solve_single_stage(model, model.observation_index(*symbol))
                               : decision::solve_without_observation(model);
    ojson j;
    j["structure"] = m.structure;
    j["obs"] = symbol.value_or("-");
    j["action"] = model.actions()[choice.action];
    j["meu"] = choice.value;
    if (format == "records") {
      out += record(j);
    } else {
      out += m.structure + '\t' + symbol.value_or("-") + '\t' + model.actions()[choice.action] +
             '\t' + ojson(choice.value).dump() + '\n';
    }
  }
  std::cout << out;
  return 0;
}

int simulate_cmd(const std::string& scenario_path, const sim::ExperimentOptions& options,
                 const std::string& out_dir, const std::string& format) {
  auto sc = std::make_shared<const scenario::Scenario>(scenario::Scenario::load(scenario_path));
  const auto result = sim::run_experiment(sc, options);
  if (!out_dir.empty()) {
    write_text(fs::path(out_dir) / "trajectory.jsonl", sim::log_text(result.log));
    write_text(fs::path(out_dir) / "summary.json", result.summary.dump(2) + "\n");
  }
  std::cout << (format == "records" ? record(result.summary) : human(result.summary));
  return 0;
}

int voi_cmd(const std::string& scenario_path, const std::string& kind,
            std::optional<std::uint64_t> seed_flag, std::optional<std::size_t> trials,
            std::optional<std::size_t> horizon_flag, const std::string& out_dir,
            const std::string& format) {
  auto sc = std::make_shared<const scenario::Scenario>(scenario::Scenario::load(scenario_path));
  const auto seed = seed_flag.value_or(sc->seed());
  const auto horizon = horizon_flag.value_or(sc->horizon());
  auto world = std::make_shared<const sim::World>(sim::generate_population(sc, seed));
  std::vector<ojson> reports;
  if (kind == "obs") {
    for (const auto& [name, type] : sc->types()) {
      auto r = voi::voi_observation(*type.believed);
      r.seed = seed;
      auto j = voi::to_json(r);
      j["type"] = name;
      reports.push_back(std::move(j));
    }
  } else if (kind == "transfer") {
    if (!sc->transfer()) throw Error(ErrorCode::kInvalidConfig, "scenario has no transfer block");
    auto spec = *sc->transfer();
    if (trials) spec.trials = *trials;
    const auto t = voi::apply_transfer(*world, spec);
    auto j = voi::to_json(voi::voi_transfer(world->type_of(spec.target).believed, t.informed,
                                            world, spec.target, horizon, spec.trials, seed));
    j["source"] = spec.source;
    j["target"] = spec.target;
    j["jaccard"] = t.proposal.eligibility.jaccard;
    reports.push_back(std::move(j));
  } else if (kind == "sacrifice") {
    if (!sc->sacrifice()) throw Error(ErrorCode::kInvalidConfig, "scenario has no sacrifice block");
    auto spec = *sc->sacrifice();
    if (trials) spec.trials = *trials;
    auto j = voi::to_json(voi::voi_failure_data(world, spec, horizon, spec.trials, seed));
    j["member"] = spec.member;
    reports.push_back(std::move(j));
  } else {
    throw Error(ErrorCode::kInvalidConfig, "unknown VoI kind '" + kind + "'");
  }
  std::string text;
  for (const auto& r : reports) text += format == "records" ? record(r) : human(r);
  if (!out_dir.empty()) {
    ojson all = ojson::array();
    for (const auto& r : reports) all.push_back(r);
    write_text(fs::path(out_dir) / ("voi_" + kind + ".json"), all.dump(2) + "\n");
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"riskdesk: population-based risk decision support"};
  app.require_subcommand(1);

  std::string format = "human";
  auto add_format = [&](CLI::App* sub) {
    sub->add_option("--format", format, "Output format")
        ->check(CLI::IsMember({"human", "records"}));
  };

  std::string tree_path, base_path, out_path;
  auto* compile = app.add_subcommand("compile", "Compile a fault tree to a network file");
  compile->add_option("tree", tree_path, "Fault tree file")->required();
  compile->add_option("--base", base_path, "Network declaring the bound health variables");
  compile->add_option("-o,--output", out_path, "Output network file (default stdout)");

  std::string scenario_path;
  std::vector<std::string> obs;
  auto* decide = app.add_subcommand("decide", "Best action and MEU per structure");
  decide->add_option("scenario", scenario_path, "Scenario file")->required();
  decide->add_option("--obs", obs, "Observation as <structure|type|*>=<symbol>");
  add_format(decide);

  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> horizon;
  std::optional<std::string> policy;
  unsigned threads = 1;
  std::string out_dir;
  auto* simulate = app.add_subcommand("simulate", "Run the population simulator");
  simulate->add_option("scenario", scenario_path, "Scenario file")->required();
  simulate->add_option("--seed", seed, "Master seed (default: scenario seed)");
  simulate->add_option("--horizon", horizon, "Steps (default: scenario horizon)");
  simulate->add_option("--policy", policy, "meu or an action id");
  simulate->add_option("--threads", threads, "Worker threads per step");
  simulate->add_option("--out", out_dir, "Directory for trajectory.jsonl and summary.json");
  add_format(simulate);

  std::string kind = "obs";
  std::optional<std::size_t> trials;
  auto* voi = app.add_subcommand("voi", "Value of information");
  voi->add_option("scenario", scenario_path, "Scenario file")->required();
  voi->add_option("--kind", kind, "obs, transfer or sacrifice")
      ->check(CLI::IsMember({"obs", "transfer", "sacrifice"}));
  voi->add_option("--seed", seed, "Master seed (default: scenario seed)");
  voi->add_option("--trials", trials, "Monte Carlo trials");
  voi->add_option("--horizon", horizon, "Steps per trial");
  voi->add_option("--out", out_dir, "Directory for the report file");
  add_format(voi);

  int port = 8080;
  std::string host = "127.0.0.1";
  std::string data_dir;
  auto* serve = app.add_subcommand("serve", "HTTP service for the operator console");
  serve->add_option("scenario", scenario_path, "Default scenario for new sessions");
  serve->add_option("--port", port, "Port");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--data-dir", data_dir, "Session store (default: $RISKDESK_DATA_DIR)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*compile) return compile_cmd(tree_path, base_path, out_path);
    if (*decide) return decide_cmd(scenario_path, obs, format);
    if (*simulate) {
      return simulate_cmd(scenario_path, {seed, horizon, policy, threads}, out_dir, format);
    }
    if (*voi) return voi_cmd(scenario_path, kind, seed, trials, horizon, out_dir, format);
    if (*serve) {
      std::optional<fs::path> sc;
      if (!scenario_path.empty()) sc = scenario_path;
      const fs::path dir = data_dir.empty() ? service::default_data_dir() : fs::path(data_dir);
      std::cerr << "riskdesk: serving on " << host << ":" << port << ", data in " << dir << "\n";
      const int rc = service::serve(port, sc, dir, host);
      if (rc != 0) std::cerr << "riskdesk: cannot bind " << host << ":" << port << "\n";
      return rc;
    }
  } catch (const ParseError& e) {
    std::cerr << "riskdesk: " << to_string(e.code()) << ": " << tree_path << ": " << e.what()
              << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "riskdesk: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "riskdesk: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
