#include <gtest/gtest.h>

#include <filesystem>

#include "riskdesk/error.hpp"
#include "riskdesk/hierarchy.hpp"
#include "support/oracles.hpp"

using namespace riskdesk;
using namespace riskdesk::hierarchy;

namespace {

HierarchyNode node(std::string id, Level level, Kind kind, std::string tag = {},
                   std::vector<std::string> children = {}) {
  HierarchyNode n;
  n.id = std::move(id);
  n.level = level;
  n.kind = kind;
  n.type_tag = std::move(tag);
  n.children = std::move(children);
  return n;
}

// One structure with two substructures of two components each.
std::vector<HierarchyNode> four_component_structure(const std::string& s, const std::string& tag) {
  return {node(s, Level::kS3, Kind::kStructure, tag, {s + ".a", s + ".b"}),
          node(s + ".a", Level::kS2, Kind::kSubstructure, "", {s + ".a.1", s + ".a.2"}),
          node(s + ".b", Level::kS2, Kind::kSubstructure, "", {s + ".b.1", s + ".b.2"}),
          node(s + ".a.1", Level::kS1, Kind::kComponent),
          node(s + ".a.2", Level::kS1, Kind::kComponent),
          node(s + ".b.1", Level::kS1, Kind::kComponent),
          node(s + ".b.2", Level::kS1, Kind::kComponent)};
}

// Two structures whose descendants are tagged {tower, blade3, gearbox} and
// {tower, blade4, gearbox}.
Hierarchy tagged_pair() {
  std::vector<HierarchyNode> nodes{
      node("farm", Level::kS5, Kind::kGroupInventory, "", {"p", "q"}),
      node("p", Level::kS3, Kind::kStructure, "m1", {"p.tower", "p.rotor", "p.nacelle"}),
      node("q", Level::kS3, Kind::kStructure, "m2", {"q.tower", "q.rotor", "q.nacelle"}),
      node("p.tower", Level::kS2, Kind::kSubstructure, "tower"),
      node("p.rotor", Level::kS2, Kind::kSubstructure, "blade3"),
      node("p.nacelle", Level::kS2, Kind::kSubstructure, "gearbox"),
      node("q.tower", Level::kS2, Kind::kSubstructure, "tower"),
      node("q.rotor", Level::kS2, Kind::kSubstructure, "blade4"),
      node("q.nacelle", Level::kS2, Kind::kSubstructure, "gearbox"),
  };
  nodes[0].merged_levels = true;
  return Hierarchy(nodes, "farm");
}

bool has_violation(const std::vector<Violation>& v, const std::string& id, const std::string& text) {
  for (const auto& x : v) {
    if (x.node == id && x.message.find(text) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST(Hierarchy, FourComponentStructureIsValid) {
  const Hierarchy h(four_component_structure("s", "m"), "s");
  EXPECT_TRUE(validate_hierarchy(h).empty());
  EXPECT_EQ(h.descendants("s").size(), 6u);
  EXPECT_EQ(h.structures("s"), (std::vector<std::string>{"s"}));
  EXPECT_EQ(h.parent("s.b.2"), std::optional<std::string>("s.b"));
  EXPECT_EQ(h.parent("s"), std::nullopt);
}

TEST(Hierarchy, MixedTypeInventoryIsReported) {
  auto nodes = four_component_structure("s1", "A");
  for (auto& n : four_component_structure("s2", "B")) nodes.push_back(n);
  nodes.push_back(node("inv", Level::kS4, Kind::kTypeInventory, "", {"s1", "s2"}));
  const auto v = validate_hierarchy(Hierarchy(nodes, "inv"));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].node, "inv");
  EXPECT_NE(v[0].message.find("homogeneity"), std::string::npos);
  EXPECT_NE(v[0].message.find("{A, B}"), std::string::npos);
}

TEST(Hierarchy, JointAboveS1IsReported) {
  auto nodes = four_component_structure("s", "m");
  nodes[1].kind = Kind::kJoint;
  const auto v = validate_hierarchy(Hierarchy(nodes, "s"));
  EXPECT_TRUE(has_violation(v, "s.a", "kind 'joint' is not allowed at level S2"));
}

TEST(Hierarchy, StructuralViolations) {
  auto nodes = four_component_structure("s", "m");
  nodes[0].children.push_back("s.a.1");        // skips a level, and a second parent
  nodes[3].children.push_back("s.b.2");        // S1 with children
  nodes.push_back(node("lost", Level::kS1, Kind::kComponent));
  nodes.push_back(node("s.c", Level::kS2, Kind::kSubstructure, "", {"ghost"}));
  nodes[0].children.push_back("s.c");
  nodes[4].health_variable = "x";
  nodes[0].merged_levels = true;
  const auto v = validate_hierarchy(Hierarchy(nodes, "s"));
  EXPECT_TRUE(has_violation(v, "s", "child 's.a.1' is at level S1, expected S2"));
  EXPECT_TRUE(has_violation(v, "s.a.1", "S1 node cannot have children"));
  EXPECT_TRUE(has_violation(v, "s.a.1", "more than one parent"));
  EXPECT_TRUE(has_violation(v, "lost", "not reachable"));
  EXPECT_TRUE(has_violation(v, "s.c", "child 'ghost' is not a node"));
  EXPECT_TRUE(has_violation(v, "s", "merged_levels"));
  EXPECT_FALSE(has_violation(v, "s.a.2", ""));
}

TEST(Hierarchy, HealthVariableAboveS3IsReported) {
  auto nodes = four_component_structure("s", "m");
  nodes.push_back(node("inv", Level::kS4, Kind::kTypeInventory, "", {"s"}));
  nodes.back().health_variable = "h";
  EXPECT_TRUE(has_violation(validate_hierarchy(Hierarchy(nodes, "inv")), "inv", "health_variable"));
}

TEST(Hierarchy, MergedGroupParentsStructures) {
  auto nodes = four_component_structure("s1", "A");
  for (auto& n : four_component_structure("s2", "A")) nodes.push_back(n);
  nodes.push_back(node("farm", Level::kS5, Kind::kGroupInventory, "", {"s1", "s2"}));
  nodes.push_back(node("all", Level::kS6, Kind::kInventory, "", {"farm"}));
  EXPECT_FALSE(validate_hierarchy(Hierarchy(nodes, "all")).empty());
  nodes[nodes.size() - 2].merged_levels = true;
  EXPECT_TRUE(validate_hierarchy(Hierarchy(nodes, "all")).empty());
  // A merged group still needs one type.
  nodes[7].type_tag = "B";
  EXPECT_TRUE(has_violation(validate_hierarchy(Hierarchy(nodes, "all")), "farm", "homogeneity"));
}

TEST(Hierarchy, ConstructionErrors) {
  EXPECT_THROW(Hierarchy({node("a", Level::kS1, Kind::kComponent)}, "b"), Error);
  EXPECT_THROW(Hierarchy({node("a", Level::kS1, Kind::kComponent),
                          node("a", Level::kS1, Kind::kComponent)},
                         "a"),
               Error);
  const Hierarchy h({node("a", Level::kS1, Kind::kComponent)}, "a");
  EXPECT_THROW(h.node("b"), Error);
}

TEST(Hierarchy, EnvironmentIsInherited) {
  auto nodes = four_component_structure("s", "m");
  nodes.push_back(node("farm", Level::kS5, Kind::kGroupInventory, "", {"s"}));
  nodes.back().merged_levels = true;
  nodes.back().shared_environment = "weather";
  const Hierarchy h(nodes, "farm");
  EXPECT_EQ(h.environment_of("s.a.1"), std::optional<std::string>("weather"));
  EXPECT_EQ(Hierarchy(four_component_structure("s", "m"), "s").environment_of("s"), std::nullopt);
}

TEST(FailureCountThreshold, Examples) {
  EXPECT_EQ(failure_count_threshold(0.99, 100), 2u);
  EXPECT_EQ(failure_count_threshold(0.99, 10), 1u);
  EXPECT_EQ(failure_count_threshold(0.5, 4), 3u);
  EXPECT_EQ(failure_count_threshold(1.0, 7), 1u);
  EXPECT_THROW(failure_count_threshold(0.0, 4), Error);
  EXPECT_THROW(failure_count_threshold(1.5, 4), Error);
  try {
    failure_count_threshold(0.9, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyMembers);
  }
}

TEST(FailureCountThreshold, HalfOfFourByEnumeration) {
  // Over all 16 patterns, the tree fails exactly when availability < 0.5.
  std::vector<MemberBinding> members;
  for (int i = 0; i < 4; ++i) members.push_back({"m" + std::to_string(i), "top" + std::to_string(i)});
  const auto tree =
      population_failure_tree({"pop", "farm", AvailabilityThreshold{0.5}, ""}, members);
  ASSERT_EQ(tree.gates.size(), 1u);
  EXPECT_EQ(tree.gates[0].kind, fault_tree::GateKind::kKofN);
  EXPECT_EQ(tree.gates[0].k, 3);
  for (int code = 0; code < 16; ++code) {
    std::map<std::string, bool> failed;
    int down = 0;
    for (int i = 0; i < 4; ++i) {
      const bool f = (code >> i) & 1;
      failed["down.m" + std::to_string(i)] = f;
      down += f;
    }
    const double availability = (4.0 - down) / 4.0;
    EXPECT_EQ(fault_tree::evaluate(tree, failed), availability < 0.5) << code;
  }
}

TEST(FailureCountThreshold, UniqueIntegerProperty) {
  for (double a : {0.5, 0.9, 0.95, 0.99}) {
    for (std::size_t n = 1; n <= 200; ++n) {
      const std::size_t k = failure_count_threshold(a, n);
      const double nd = static_cast<double>(n);
      ASSERT_LT((nd - static_cast<double>(k)) / nd, a) << a << " " << n;
      ASSERT_GE((nd - static_cast<double>(k) + 1) / nd, a) << a << " " << n;
    }
  }
}

TEST(PopulationFailureTree, CustomTreeOverMembers) {
  const auto custom = fault_tree::parse_fault_tree(
      "tree pair\nevent a binds top0 failed {failed}\nevent b binds top1 failed {failed}\n"
      "top both = AND(a, b)\n");
  const std::vector<MemberBinding> members{{"m0", "top0"}, {"m1", "top1"}};
  EXPECT_EQ(population_failure_tree({"pop", "farm", custom, ""}, members), custom);
  const std::vector<MemberBinding> other{{"m0", "top0"}, {"m2", "top2"}};
  EXPECT_THROW(population_failure_tree({"pop", "farm", custom, ""}, other), Error);
  EXPECT_THROW(population_failure_tree({"pop", "farm", AvailabilityThreshold{0.9}, ""}, {}), Error);
}

TEST(Similarity, Examples) {
  const auto h = tagged_pair();
  const auto s = similarity(h, "p", "q");
  EXPECT_DOUBLE_EQ(s.jaccard, 0.5);
  EXPECT_EQ(s.shared_tags, (std::set<std::string>{"gearbox", "tower"}));
  EXPECT_DOUBLE_EQ(similarity(h, "p", "p").jaccard, 1.0);
  EXPECT_TRUE(transfer_eligible(h, "p", "q", 0.4).eligible);
  EXPECT_FALSE(transfer_eligible(h, "p", "q", 0.6).eligible);
  EXPECT_TRUE(transfer_eligible(h, "q", "q", 1.0).eligible);
}

TEST(Similarity, DisjointAndMismatched) {
  std::vector<HierarchyNode> nodes{
      node("farm", Level::kS5, Kind::kGroupInventory, "", {"p", "q"}),
      node("p", Level::kS3, Kind::kStructure, "m", {"p.x"}),
      node("q", Level::kS3, Kind::kStructure, "m", {"q.y"}),
      node("p.x", Level::kS2, Kind::kSubstructure, "x"),
      node("q.y", Level::kS2, Kind::kSubstructure, "y"),
  };
  nodes[0].merged_levels = true;
  const Hierarchy h(nodes, "farm");
  EXPECT_DOUBLE_EQ(similarity(h, "p", "q").jaccard, 0.0);
  try {
    similarity(h, "p", "p.x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLevelMismatch);
  }
  EXPECT_THROW(similarity(h, "p.x", "q.y"), Error);
}

TEST(Similarity, RandomHierarchyProperties) {
  oracle::Rand r(5);
  const std::vector<std::string> tags{"tower", "blade3", "blade4", "gearbox", "pitch", "yaw"};
  std::vector<HierarchyNode> nodes{node("farm", Level::kS5, Kind::kGroupInventory)};
  nodes[0].merged_levels = true;
  std::vector<std::string> ids;
  for (int s = 0; s < 12; ++s) {
    const std::string id = "t" + std::to_string(s);
    ids.push_back(id);
    nodes[0].children.push_back(id);
    nodes.push_back(node(id, Level::kS3, Kind::kStructure, "m"));
    const std::size_t n_sub = r.below(4);
    for (std::size_t i = 0; i < n_sub; ++i) {
      const std::string sub = id + ".s" + std::to_string(i);
      nodes.push_back(node(sub, Level::kS2, Kind::kSubstructure, tags[r.below(tags.size())]));
    }
  }
  for (const auto& n : nodes) {
    if (n.level != Level::kS2) continue;
    const auto owner = n.id.substr(0, n.id.find('.'));
    for (auto& m : nodes) {
      if (m.id == owner) m.children.push_back(n.id);
    }
  }
  const Hierarchy h(nodes, "farm");
  ASSERT_TRUE(validate_hierarchy(h).empty());
  for (const auto& a : ids) {
    EXPECT_DOUBLE_EQ(similarity(h, a, a).jaccard, 1.0);
    for (const auto& b : ids) {
      const double j = similarity(h, a, b).jaccard;
      EXPECT_GE(j, 0.0);
      EXPECT_LE(j, 1.0);
      EXPECT_EQ(j, similarity(h, b, a).jaccard);
      EXPECT_EQ(transfer_eligible(h, a, b, 0.5).eligible, transfer_eligible(h, b, a, 0.5).eligible);
    }
  }
}

TEST(HierarchyIo, JsonRoundTrip) {
  auto nodes = four_component_structure("s", "m");
  nodes[0].health_variable = "s.top";
  nodes[3].kind = Kind::kJoint;
  nodes.push_back(node("farm", Level::kS5, Kind::kGroupInventory, "", {"s"}));
  nodes.back().merged_levels = true;
  nodes.back().shared_environment = "weather";
  const Hierarchy h(nodes, "farm");
  const auto doc = hierarchy_to_json(h);
  EXPECT_EQ(doc["format"], kHierarchyFormat);
  const auto back = hierarchy_from_json(nlohmann::json::parse(doc.dump()));
  EXPECT_EQ(hierarchy_to_json(back), doc);
  EXPECT_EQ(hierarchy_hash(back), hierarchy_hash(h));
  EXPECT_EQ(back.node("s.a.1").kind, Kind::kJoint);
  EXPECT_EQ(back.node("farm").shared_environment, std::optional<std::string>("weather"));

  const auto path = std::filesystem::temp_directory_path() / "riskdesk_hierarchy_test.json";
  write_hierarchy_file(path, h);
  EXPECT_EQ(hierarchy_hash(read_hierarchy_file(path)), hierarchy_hash(h));
  std::filesystem::remove(path);
}

TEST(HierarchyIo, RejectsForeignDocuments) {
  EXPECT_THROW(hierarchy_from_json(nlohmann::json::parse(R"({"format":"other","root":{}})")), Error);
  EXPECT_THROW(hierarchy_from_json(nlohmann::json::parse(
                   R"({"format":"riskdesk.hierarchy","version":1,"root":{"id":"a","level":"S9","kind":"component"}})")),
               Error);
  EXPECT_THROW(read_hierarchy_file("/nonexistent/h.json"), Error);
}
