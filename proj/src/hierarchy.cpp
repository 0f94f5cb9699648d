#include "riskdesk/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "riskdesk/error.hpp"

namespace riskdesk::hierarchy {

namespace {

constexpr std::pair<Kind, std::string_view> kKindNames[] = {
    {Kind::kComponent, "component"},           {Kind::kJoint, "joint"},
    {Kind::kSubstructure, "substructure"},     {Kind::kStructure, "structure"},
    {Kind::kTypeInventory, "type_inventory"},  {Kind::kGroupInventory, "group_inventory"},
    {Kind::kInventory, "inventory"},
};

Level level_of(Kind kind) {
  switch (kind) {
    case Kind::kComponent:
    case Kind::kJoint: return Level::kS1;
    case Kind::kSubstructure: return Level::kS2;
    case Kind::kStructure: return Level::kS3;
    case Kind::kTypeInventory: return Level::kS4;
    case Kind::kGroupInventory: return Level::kS5;
    case Kind::kInventory: return Level::kS6;
  }
  return Level::kS1;
}

int rank(Level l) { return static_cast<int>(l); }

}  // namespace

std::string_view to_string(Level level) {
  static constexpr std::string_view names[] = {"S1", "S2", "S3", "S4", "S5", "S6"};
  return names[rank(level) - 1];
}

std::string_view to_string(Kind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "component";
}

Level parse_level(std::string_view text) {
  if (text.size() == 2 && text[0] == 'S' && text[1] >= '1' && text[1] <= '6') {
    return static_cast<Level>(text[1] - '0');
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown level '" + std::string(text) + "'");
}

Kind parse_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown node kind '" + std::string(text) + "'");
}

Hierarchy::Hierarchy(std::vector<HierarchyNode> nodes, std::string root)
    : nodes_(std::move(nodes)), root_(std::move(root)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!index_.emplace(nodes_[i].id, i).second) {
      throw Error(ErrorCode::kInvalidConfig, "duplicate node id '" + nodes_[i].id + "'");
    }
  }
  if (!index_.contains(root_)) {
    throw Error(ErrorCode::kInvalidConfig, "root '" + root_ + "' is not a node");
  }
}

const HierarchyNode& Hierarchy::node(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw Error(ErrorCode::kUnknownReference, "no hierarchy node '" + std::string(id) + "'");
  }
  return nodes_[it->second];
}

std::optional<std::string> Hierarchy::parent(std::string_view id) const {
  for (const auto& n : nodes_) {
    if (std::find(n.children.begin(), n.children.end(), id) != n.children.end()) return n.id;
  }
  return std::nullopt;
}

std::vector<std::string> Hierarchy::descendants(std::string_view id) const {
  std::vector<std::string> out;
  std::set<std::string> seen{std::string(id)};
  std::function<void(const HierarchyNode&)> walk = [&](const HierarchyNode& n) {
    for (const auto& c : n.children) {
      if (!contains(c) || !seen.insert(c).second) continue;
      out.push_back(c);
      walk(node(c));
    }
  };
  walk(node(id));
  return out;
}

std::vector<std::string> Hierarchy::structures(std::string_view id) const {
  std::vector<std::string> out;
  if (node(id).level == Level::kS3) out.emplace_back(id);
  for (const auto& d : descendants(id)) {
    if (node(d).level == Level::kS3) out.push_back(d);
  }
  return out;
}

std::set<std::string> Hierarchy::descendant_tags(std::string_view id) const {
  std::set<std::string> tags;
  for (const auto& d : descendants(id)) {
    const auto& tag = node(d).type_tag;
    if (!tag.empty()) tags.insert(tag);
  }
  return tags;
}

std::optional<std::string> Hierarchy::environment_of(std::string_view id) const {
  std::optional<std::string> cur{std::string(id)};
  std::set<std::string> seen;
  while (cur && seen.insert(*cur).second) {
    const auto& n = node(*cur);
    if (n.shared_environment) return n.shared_environment;
    cur = parent(*cur);
  }
  return std::nullopt;
}

std::vector<Violation> validate_hierarchy(const Hierarchy& h) {
  std::vector<Violation> out;
  auto report = [&](const std::string& id, std::string msg) {
    out.push_back({id, std::move(msg)});
  };
  std::map<std::string, int> parents;
  for (const auto& n : h.nodes()) {
    if (level_of(n.kind) != n.level) {
      report(n.id, "kind '" + std::string(to_string(n.kind)) + "' is not allowed at level " +
                       std::string(to_string(n.level)));
    }
    if (n.merged_levels && n.level != Level::kS5) {
      report(n.id, "merged_levels is only meaningful on an S5 node");
    }
    if (n.health_variable && rank(n.level) > rank(Level::kS3)) {
      report(n.id, "health_variable is only allowed on S1-S3 nodes");
    }
    if (n.level == Level::kS1 && !n.children.empty()) {
      report(n.id, "S1 node cannot have children");
    }
    const int expected = (n.merged_levels && n.level == Level::kS5) ? rank(Level::kS3)
                                                                    : rank(n.level) - 1;
    for (const auto& c : n.children) {
      ++parents[c];
      if (!h.contains(c)) {
        report(n.id, "child '" + c + "' is not a node");
        continue;
      }
      const auto& child = h.node(c);
      if (rank(child.level) != expected) {
        report(n.id, "child '" + c + "' is at level " + std::string(to_string(child.level)) +
                         ", expected S" + std::to_string(expected));
      }
    }
    const bool homogeneous_role =
        n.level == Level::kS4 || (n.level == Level::kS5 && n.merged_levels);
    if (homogeneous_role) {
      std::set<std::string> tags;
      for (const auto& s : h.structures(n.id)) tags.insert(h.node(s).type_tag);
      if (tags.size() > 1) {
        std::string list;
        for (const auto& t : tags) list += (list.empty() ? "" : ", ") + t;
        report(n.id, "homogeneity: structures carry several type tags {" + list + "}");
      }
    }
  }
  for (const auto& [c, count] : parents) {
    if (count > 1) report(c, "node has more than one parent");
  }
  if (parents.contains(h.root())) report(h.root(), "root node has a parent");
  std::set<std::string> reachable{h.root()};
  for (const auto& d : h.descendants(h.root())) reachable.insert(d);
  for (const auto& n : h.nodes()) {
    if (!reachable.contains(n.id)) report(n.id, "node is not reachable from the root");
  }
  return out;
}

std::size_t failure_count_threshold(double availability, std::size_t members) {
  if (!(availability > 0.0 && availability <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "availability threshold must be in (0, 1]");
  }
  if (members == 0) throw Error(ErrorCode::kEmptyMembers, "population has no members");
  const double n = static_cast<double>(members);
  auto below = [&](std::size_t failed) {
    return static_cast<double>(members - failed) / n < availability;
  };
  // Start from floor(n(1-a)) + 1 and correct for rounding either way.
  auto k = static_cast<std::size_t>(
      std::min(n, std::max(1.0, std::floor(n * (1.0 - availability)) + 1.0)));
  while (k > 1 && below(k - 1)) --k;
  while (k < members && !below(k)) ++k;
  return k;
}

fault_tree::FaultTree population_failure_tree(const PopulationFailureMode& mode,
                                              const std::vector<MemberBinding>& members) {
  if (members.empty()) {
    throw Error(ErrorCode::kEmptyMembers, "population failure mode '" + mode.id +
                                              "' has no members");
  }
  if (const auto* custom = std::get_if<fault_tree::FaultTree>(&mode.criterion)) {
    fault_tree::validate(*custom);
    std::set<std::string> tops;
    for (const auto& m : members) tops.insert(m.top_variable);
    for (const auto& e : custom->events) {
      if (!tops.contains(e.binding.variable)) {
        throw Error(ErrorCode::kUnknownReference,
                    "event '" + e.id + "' binds '" + e.binding.variable +
                        "', which is not a member top event");
      }
    }
    return *custom;
  }
  const double a = std::get<AvailabilityThreshold>(mode.criterion).fraction;
  fault_tree::FaultTree tree;
  tree.name = mode.id;
  tree.top = mode.id;
  fault_tree::Gate gate{mode.id, fault_tree::GateKind::kKofN,
                        static_cast<int>(failure_count_threshold(a, members.size())), {}, 0};
  for (const auto& m : members) {
    const std::string ev = "down." + m.structure;
    tree.events.push_back({ev, {m.top_variable, {fault_tree::kFailed}}, 0});
    gate.inputs.push_back(ev);
  }
  tree.gates.push_back(std::move(gate));
  fault_tree::validate(tree);
  return tree;
}

SimilarityScore similarity(const Hierarchy& h, std::string_view a, std::string_view b) {
  const auto& na = h.node(a);
  const auto& nb = h.node(b);
  auto comparable = [](Level l) { return l == Level::kS3 || l == Level::kS4; };
  if (na.level != nb.level || !comparable(na.level)) {
    throw Error(ErrorCode::kLevelMismatch,
                "similarity needs two S3 or two S4 nodes, got " +
                    std::string(to_string(na.level)) + " and " +
                    std::string(to_string(nb.level)));
  }
  SimilarityScore s{std::string(a), std::string(b), 1.0, {}};
  const auto ta = h.descendant_tags(a);
  const auto tb = h.descendant_tags(b);
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(),
                        std::inserter(s.shared_tags, s.shared_tags.end()));
  std::set<std::string> all;
  std::set_union(ta.begin(), ta.end(), tb.begin(), tb.end(), std::inserter(all, all.end()));
  // Two untagged nodes are indistinguishable under this measure.
  if (!all.empty()) {
    s.jaccard = static_cast<double>(s.shared_tags.size()) / static_cast<double>(all.size());
  }
  return s;
}

Eligibility transfer_eligible(const Hierarchy& h, std::string_view a, std::string_view b,
                              double threshold) {
  auto score = similarity(h, a, b);
  return {score.jaccard >= threshold, std::move(score)};
}

namespace {

nlohmann::ordered_json node_json(const Hierarchy& h, const HierarchyNode& n,
                                 std::set<std::string>& seen) {
  nlohmann::ordered_json j;
  j["id"] = n.id;
  j["level"] = std::string(to_string(n.level));
  j["kind"] = std::string(to_string(n.kind));
  if (!n.type_tag.empty()) j["type_tag"] = n.type_tag;
  if (n.health_variable) j["health_variable"] = *n.health_variable;
  if (n.merged_levels) j["merged_levels"] = true;
  if (n.shared_environment) j["shared_environment"] = *n.shared_environment;
  if (!n.children.empty()) {
    auto& kids = j["children"] = nlohmann::ordered_json::array();
    for (const auto& c : n.children) {
      if (h.contains(c) && seen.insert(c).second) kids.push_back(node_json(h, h.node(c), seen));
    }
  }
  return j;
}

void collect(const nlohmann::json& j, std::vector<HierarchyNode>& out) {
  HierarchyNode n;
  n.id = j.at("id").get<std::string>();
  n.level = parse_level(j.at("level").get<std::string>());
  n.kind = parse_kind(j.at("kind").get<std::string>());
  n.type_tag = j.value("type_tag", "");
  if (j.contains("health_variable")) n.health_variable = j.at("health_variable").get<std::string>();
  n.merged_levels = j.value("merged_levels", false);
  if (j.contains("shared_environment")) {
    n.shared_environment = j.at("shared_environment").get<std::string>();
  }
  const std::size_t pos = out.size();
  out.push_back(n);
  if (j.contains("children")) {
    for (const auto& c : j.at("children")) {
      out[pos].children.push_back(c.at("id").get<std::string>());
      collect(c, out);
    }
  }
}

}  // namespace

nlohmann::ordered_json hierarchy_to_json(const Hierarchy& h) {
  nlohmann::ordered_json doc;
  doc["format"] = kHierarchyFormat;
  doc["version"] = kHierarchyFormatVersion;
  std::set<std::string> seen{h.root()};
  doc["root"] = node_json(h, h.node(h.root()), seen);
  return doc;
}

Hierarchy hierarchy_from_json(const nlohmann::json& doc) {
  try {
    if (doc.contains("format") && doc.at("format") != kHierarchyFormat) {
      throw Error(ErrorCode::kInvalidConfig, "not a riskdesk hierarchy document");
    }
    if (doc.value("version", kHierarchyFormatVersion) > kHierarchyFormatVersion) {
      throw Error(ErrorCode::kInvalidConfig, "unsupported hierarchy format version");
    }
    std::vector<HierarchyNode> nodes;
    collect(doc.at("root"), nodes);
    std::string root = nodes.front().id;
    return Hierarchy(std::move(nodes), std::move(root));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("malformed hierarchy: ") + e.what());
  }
}

Hierarchy read_hierarchy_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
  return hierarchy_from_json(doc);
}

void write_hierarchy_file(const std::filesystem::path& path, const Hierarchy& h) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << hierarchy_to_json(h).dump(2) << "\n";
}

std::uint64_t hierarchy_hash(const Hierarchy& h) {
  const std::string text = hierarchy_to_json(h).dump();
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

}  // namespace riskdesk::hierarchy
