// The S1-S6 system-of-systems tree: components and joints (S1),
// substructures (S2), structures (S3), type inventories (S4), group
// inventories (S5) and the inventory (S6). Also population failure modes and
// the Jaccard gate on transfer between structures.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "riskdesk/fault_tree.hpp"

namespace riskdesk::hierarchy {

enum class Level { kS1 = 1, kS2, kS3, kS4, kS5, kS6 };

enum class Kind {
  kComponent,
  kJoint,
  kSubstructure,
  kStructure,
  kTypeInventory,
  kGroupInventory,
  kInventory,
};

std::string_view to_string(Level level);
std::string_view to_string(Kind kind);
Level parse_level(std::string_view text);
Kind parse_kind(std::string_view text);

struct HierarchyNode {
  std::string id;
  Level level = Level::kS1;
  Kind kind = Kind::kComponent;
  std::string type_tag;
  std::vector<std::string> children;
  std::optional<std::string> health_variable;
  /// An S5 node that also plays the S4 role and parents structures directly.
  bool merged_levels = false;
  /// Environment shared by every structure below this node (common cause).
  std::optional<std::string> shared_environment;
};

/// Flat node store with a designated root. Construction only rejects
/// duplicate ids and a missing root; everything else is `validate_hierarchy`.
class Hierarchy {
 public:
  Hierarchy() = default;
  Hierarchy(std::vector<HierarchyNode> nodes, std::string root);

  const std::string& root() const { return root_; }
  bool contains(std::string_view id) const { return index_.contains(id); }
  const HierarchyNode& node(std::string_view id) const;
  const std::vector<HierarchyNode>& nodes() const { return nodes_; }
  std::optional<std::string> parent(std::string_view id) const;

  /// Strict descendants in depth-first preorder.
  std::vector<std::string> descendants(std::string_view id) const;
  /// Descendant (or self) S3 structures in depth-first preorder.
  std::vector<std::string> structures(std::string_view id) const;
  /// Non-empty type tags of all strict descendants.
  std::set<std::string> descendant_tags(std::string_view id) const;
  /// Nearest declared shared environment at or above `id`.
  std::optional<std::string> environment_of(std::string_view id) const;

 private:
  std::vector<HierarchyNode> nodes_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::string root_;
};

struct Violation {
  std::string node;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Empty iff every structural invariant holds.
std::vector<Violation> validate_hierarchy(const Hierarchy& h);

struct AvailabilityThreshold {
  double fraction = 0.99;
};

struct PopulationFailureMode {
  std::string id;
  std::string scope;
  std::variant<AvailabilityThreshold, fault_tree::FaultTree> criterion;
  std::string description;
};

/// A structure and the {ok, failed} variable carrying its failure event.
struct MemberBinding {
  std::string structure;
  std::string top_variable;
};

/// Smallest failed-member count k with (n - k) / n < availability.
std::size_t failure_count_threshold(double availability, std::size_t members);

/// Availability modes become KOFN(k; member top events); custom modes are
/// checked against the members and returned as given.
fault_tree::FaultTree population_failure_tree(const PopulationFailureMode& mode,
                                              const std::vector<MemberBinding>& members);

struct SimilarityScore {
  std::string a;
  std::string b;
  double jaccard = 0.0;
  std::set<std::string> shared_tags;
};

SimilarityScore similarity(const Hierarchy& h, std::string_view a, std::string_view b);

struct Eligibility {
  bool eligible = false;
  SimilarityScore score;
};

Eligibility transfer_eligible(const Hierarchy& h, std::string_view a, std::string_view b,
                              double threshold);

// Hierarchy file: nested nodes, schema in docs/formats.md.
inline constexpr const char* kHierarchyFormat = "riskdesk.hierarchy";
inline constexpr int kHierarchyFormatVersion = 1;

nlohmann::ordered_json hierarchy_to_json(const Hierarchy& h);
Hierarchy hierarchy_from_json(const nlohmann::json& doc);
Hierarchy read_hierarchy_file(const std::filesystem::path& path);
void write_hierarchy_file(const std::filesystem::path& path, const Hierarchy& h);

/// FNV-1a over the canonical JSON text; stable fingerprint for golden tests.
std::uint64_t hierarchy_hash(const Hierarchy& h);

}  // namespace riskdesk::hierarchy
