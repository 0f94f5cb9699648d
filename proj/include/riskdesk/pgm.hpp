// Discrete Bayesian networks with exact inference.
//
// Variables carry an ordered list of state labels; that order is canonical
// and drives CPT row layout: a CPT row is selected by the parent states in
// mixed radix, first parent most significant.
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace riskdesk::pgm {

/// Tolerance for row sums and posterior normalization.
inline constexpr double kProbabilityTolerance = 1e-9;

/// Default cap on the joint state-space size accepted by `enumerate_infer`.
inline constexpr std::size_t kDefaultEnumerationCap = std::size_t{1} << 20;

struct Variable {
  std::string id;
  std::vector<std::string> states;

  std::size_t cardinality() const { return states.size(); }
  std::optional<std::size_t> state_index(std::string_view label) const;
};

/// Conditional probability table P(child | parents).
class Cpt {
 public:
  Cpt() = default;
  Cpt(std::string child, std::vector<std::string> parents,
      std::vector<std::vector<double>> rows);

  const std::string& child() const { return child_; }
  const std::vector<std::string>& parents() const { return parents_; }
  std::size_t row_count() const { return rows_.size(); }
  const std::vector<double>& row(std::size_t r) const { return rows_[r]; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }

 private:
  std::string child_;
  std::vector<std::string> parents_;
  std::vector<std::vector<double>> rows_;
};

/// Observed states keyed by variable id.
using Evidence = std::map<std::string, std::string>;
/// A full assignment has the same shape as evidence but covers every variable.
using Assignment = std::map<std::string, std::string>;

struct Posterior {
  std::string variable;
  std::vector<double> distribution;
};

/// Immutable-after-construction DAG of discrete variables.
///
/// `add` appends one variable whose parents already exist, so incremental
/// construction is acyclic by construction. `build` accepts any order and
/// checks acyclicity itself. Either path validates every CPT.
class BayesNet {
 public:
  BayesNet() = default;

  static BayesNet build(std::vector<Variable> variables, std::vector<Cpt> cpts);

  void add(Variable variable, Cpt cpt);

  std::size_t size() const { return variables_.size(); }
  bool contains(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;
  const Variable& variable(std::size_t i) const { return variables_[i]; }
  const Variable& variable(std::string_view id) const;
  const std::vector<Variable>& variables() const { return variables_; }
  const Cpt& cpt(std::size_t i) const { return cpts_[i]; }
  const std::vector<std::size_t>& parent_indices(std::size_t i) const {
    return parent_index_[i];
  }
  /// Parents before children; ties keep declaration order.
  const std::vector<std::size_t>& topological_order() const { return topo_; }

  /// CPT entry for `child_state` given a full assignment of state indices.
  double entry(std::size_t var, std::span<const std::size_t> states) const;

 private:
  void check_cpt(std::size_t var) const;
  void rebuild_topology();

  std::vector<Variable> variables_;
  std::vector<Cpt> cpts_;
  std::vector<std::vector<std::size_t>> parent_index_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<std::size_t> topo_;
};

/// Product of the CPT entries selected by a full assignment.
double joint_probability(const BayesNet& net, const Assignment& assignment);
double joint_probability(const BayesNet& net, std::span<const std::size_t> states);

/// Exact posterior by variable elimination (min-fill order).
Posterior infer(const BayesNet& net, const Evidence& evidence,
                std::string_view query);

/// Exact posterior by full joint enumeration. Serves as the oracle for `infer`.
Posterior enumerate_infer(const BayesNet& net, const Evidence& evidence,
                          std::string_view query,
                          std::size_t cap = kDefaultEnumerationCap);

/// Order in which `infer` eliminates hidden variables for this query.
std::vector<std::string> elimination_order(const BayesNet& net,
                                           const Evidence& evidence,
                                           std::string_view query);

}  // namespace riskdesk::pgm
