// Fault trees over bound health variables, their text form, and their
// compilation into Bayesian-network fragments with deterministic gate CPTs.
//
// Text form, one statement per line, `#` starts a comment:
//
//   tree <name>
//   event <id> binds <variable-id> failed {<state>[, <state>]*}
//   gate <id> = AND(<ref>[, <ref>]*) | OR(<ref>[, <ref>]*) | KOFN(<k>; <ref>[, <ref>]*)
//   top <gate-id>
//   top <gate-id> = <gate expression>      (declares the gate in place)
//
// Identifiers match [A-Za-z_][A-Za-z0-9_.]*. References may point forward.
#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "riskdesk/pgm.hpp"

namespace riskdesk::fault_tree {

inline constexpr const char* kOk = "ok";
inline constexpr const char* kFailed = "failed";

/// Gates wider than this cannot be compiled to an explicit CPT.
inline constexpr std::size_t kMaxCompiledFanIn = 20;

enum class GateKind { kAnd, kOr, kKofN };

struct Gate {
  std::string id;
  GateKind kind = GateKind::kOr;
  int k = 0;  // KOFN only
  std::vector<std::string> inputs;
  int line = 0;  // source line, 0 when built in code

  /// Minimum number of failed inputs that fails the gate.
  std::size_t threshold() const;
};

struct Binding {
  std::string variable;
  std::vector<std::string> failed_states;

  friend bool operator==(const Binding&, const Binding&) = default;
};

/// Event id -> bound health variable and the states counted as failed.
using Bindings = std::map<std::string, Binding>;

struct BasicEvent {
  std::string id;
  Binding binding;
  int line = 0;
};

struct FaultTree {
  std::string name;
  std::string top;
  std::vector<BasicEvent> events;
  std::vector<Gate> gates;

  Bindings bindings() const;
  const Gate* find_gate(std::string_view id) const;
  const BasicEvent* find_event(std::string_view id) const;
};

/// Structural equality; source positions are ignored.
bool operator==(const FaultTree& a, const FaultTree& b);

FaultTree parse_fault_tree(std::string_view text);
std::string print_fault_tree(const FaultTree& tree);

/// Checks references, k bounds, duplicates, and acyclicity of a tree built
/// in code. Parsed trees have already passed this.
void validate(const FaultTree& tree);

/// Gate ids ordered so that every gate follows the gates it reads.
std::vector<std::string> gate_order(const FaultTree& tree);

/// Adds one {ok, failed} variable per basic event and per gate on top of
/// `base`, which must declare the bound health variables.
pgm::BayesNet compile_to_bn(const FaultTree& tree, const Bindings& bindings,
                            const pgm::BayesNet& base);
pgm::BayesNet compile_to_bn(const FaultTree& tree, const pgm::BayesNet& base);

/// Base network for a standalone tree: each bound variable becomes a root
/// with states {ok, <failed states...>} and a uniform prior.
pgm::BayesNet default_base(const FaultTree& tree);

/// P(top = failed | evidence).
double failure_probability(const pgm::BayesNet& net, const pgm::Evidence& evidence,
                           std::string_view top);

/// Direct Boolean evaluation given which basic events have failed.
bool evaluate(const FaultTree& tree, const std::map<std::string, bool>& event_failed);

/// Boolean evaluation from health-variable states through the tree bindings.
bool evaluate_states(const FaultTree& tree,
                     const std::map<std::string, std::string>& variable_states);

}  // namespace riskdesk::fault_tree
