#include "riskdesk/network_io.hpp"

#include <fstream>
#include <sstream>

#include "riskdesk/error.hpp"

namespace riskdesk::pgm {

nlohmann::ordered_json network_to_json(const BayesNet& net) {
  nlohmann::ordered_json doc;
  doc["format"] = kNetworkFormat;
  doc["version"] = kNetworkFormatVersion;
  auto& vars = doc["variables"] = nlohmann::ordered_json::array();
  auto& cpts = doc["cpts"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& v = net.variable(i);
    vars.push_back({{"id", v.id}, {"states", v.states}});
    const auto& c = net.cpt(i);
    cpts.push_back({{"child", c.child()}, {"parents", c.parents()}, {"table", c.rows()}});
  }
  return doc;
}

BayesNet network_from_json(const nlohmann::json& doc) {
  try {
    if (doc.contains("format") && doc.at("format") != kNetworkFormat) {
      throw Error(ErrorCode::kInvalidModel, "not a riskdesk network document");
    }
    if (doc.contains("version") && doc.at("version").get<int>() > kNetworkFormatVersion) {
      throw Error(ErrorCode::kInvalidModel, "unsupported network format version");
    }
    std::vector<Variable> vars;
    for (const auto& v : doc.at("variables")) {
      vars.push_back(Variable{v.at("id").get<std::string>(),
                              v.at("states").get<std::vector<std::string>>()});
    }
    std::vector<Cpt> cpts;
    for (const auto& c : doc.at("cpts")) {
      cpts.emplace_back(c.at("child").get<std::string>(),
                        c.value("parents", std::vector<std::string>{}),
                        c.at("table").get<std::vector<std::vector<double>>>());
    }
    return BayesNet::build(std::move(vars), std::move(cpts));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidModel, std::string("malformed network document: ") + e.what());
  }
}

std::string dump_network(const BayesNet& net) { return network_to_json(net).dump(2) + "\n"; }

BayesNet parse_network(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidModel, std::string("network file is not JSON: ") + e.what());
  }
  return network_from_json(doc);
}

BayesNet read_network_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_network(ss.str());
}

void write_network_file(const std::filesystem::path& path, const BayesNet& net) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << dump_network(net);
}

}  // namespace riskdesk::pgm
