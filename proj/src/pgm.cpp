#include "riskdesk/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "riskdesk/error.hpp"

namespace riskdesk::pgm {

std::optional<std::size_t> Variable::state_index(std::string_view label) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == label) return i;
  }
  return std::nullopt;
}

Cpt::Cpt(std::string child, std::vector<std::string> parents,
         std::vector<std::vector<double>> rows)
    : child_(std::move(child)), parents_(std::move(parents)), rows_(std::move(rows)) {}

namespace {

void check_variable(const Variable& v) {
  if (v.id.empty()) throw Error(ErrorCode::kInvalidModel, "variable with empty id");
  if (v.states.size() < 2) {
    throw Error(ErrorCode::kInvalidModel,
                "variable '" + v.id + "' needs at least two states");
  }
  std::set<std::string_view> seen;
  for (const auto& s : v.states) {
    if (!seen.insert(s).second) {
      throw Error(ErrorCode::kInvalidModel,
                  "variable '" + v.id + "' repeats state '" + s + "'");
    }
  }
}

}  // namespace

BayesNet BayesNet::build(std::vector<Variable> variables, std::vector<Cpt> cpts) {
  BayesNet net;
  for (auto& v : variables) {
    check_variable(v);
    if (!net.index_.emplace(v.id, net.variables_.size()).second) {
      throw Error(ErrorCode::kInvalidModel, "duplicate variable '" + v.id + "'");
    }
    net.variables_.push_back(std::move(v));
  }
  net.cpts_.resize(net.variables_.size());
  std::vector<bool> have(net.variables_.size(), false);
  for (auto& c : cpts) {
    auto it = net.index_.find(c.child());
    if (it == net.index_.end()) {
      throw Error(ErrorCode::kInvalidModel,
                  "CPT for undeclared variable '" + c.child() + "'");
    }
    if (have[it->second]) {
      throw Error(ErrorCode::kInvalidModel,
                  "more than one CPT for variable '" + c.child() + "'");
    }
    have[it->second] = true;
    net.cpts_[it->second] = std::move(c);
  }
  net.parent_index_.resize(net.variables_.size());
  for (std::size_t i = 0; i < net.variables_.size(); ++i) {
    if (!have[i]) {
      throw Error(ErrorCode::kInvalidModel,
                  "variable '" + net.variables_[i].id + "' has no CPT");
    }
    for (const auto& p : net.cpts_[i].parents()) {
      auto it = net.index_.find(p);
      if (it == net.index_.end()) {
        throw Error(ErrorCode::kInvalidModel,
                    "parent '" + p + "' of '" + net.variables_[i].id + "' is not declared");
      }
      net.parent_index_[i].push_back(it->second);
    }
    net.check_cpt(i);
  }
  net.rebuild_topology();
  return net;
}

void BayesNet::add(Variable variable, Cpt cpt) {
  check_variable(variable);
  if (index_.contains(variable.id)) {
    throw Error(ErrorCode::kInvalidModel, "duplicate variable '" + variable.id + "'");
  }
  if (cpt.child() != variable.id) {
    throw Error(ErrorCode::kInvalidModel, "CPT child '" + cpt.child() +
                                              "' does not match variable '" +
                                              variable.id + "'");
  }
  std::vector<std::size_t> parents;
  for (const auto& p : cpt.parents()) {
    auto it = index_.find(p);
    if (it == index_.end()) {
      throw Error(ErrorCode::kInvalidModel,
                  "parent '" + p + "' of '" + variable.id + "' is not declared");
    }
    parents.push_back(it->second);
  }
  const std::size_t i = variables_.size();
  index_.emplace(variable.id, i);
  variables_.push_back(std::move(variable));
  cpts_.push_back(std::move(cpt));
  parent_index_.push_back(std::move(parents));
  try {
    check_cpt(i);
  } catch (...) {
    index_.erase(variables_.back().id);
    variables_.pop_back();
    cpts_.pop_back();
    parent_index_.pop_back();
    throw;
  }
  topo_.push_back(i);
}

void BayesNet::check_cpt(std::size_t i) const {
  const auto& v = variables_[i];
  const auto& c = cpts_[i];
  std::set<std::size_t> distinct(parent_index_[i].begin(), parent_index_[i].end());
  if (distinct.size() != parent_index_[i].size() || distinct.contains(i)) {
    throw Error(ErrorCode::kInvalidModel, "CPT of '" + v.id + "' has a repeated parent");
  }
  std::size_t expected_rows = 1;
  for (auto p : parent_index_[i]) expected_rows *= variables_[p].cardinality();
  if (c.row_count() != expected_rows) {
    throw Error(ErrorCode::kInvalidModel,
                "CPT of '" + v.id + "' has " + std::to_string(c.row_count()) +
                    " rows, expected " + std::to_string(expected_rows));
  }
  for (std::size_t r = 0; r < c.row_count(); ++r) {
    const auto& row = c.row(r);
    if (row.size() != v.cardinality()) {
      throw Error(ErrorCode::kInvalidModel, "CPT row " + std::to_string(r) + " of '" +
                                                v.id + "' has wrong length");
    }
    double sum = 0.0;
    for (double p : row) {
      if (!std::isfinite(p) || p < 0.0) {
        throw Error(ErrorCode::kInvalidModel, "CPT row " + std::to_string(r) +
                                                  " of '" + v.id +
                                                  "' has a negative or non-finite entry");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kProbabilityTolerance) {
      throw Error(ErrorCode::kInvalidModel, "CPT row " + std::to_string(r) + " of '" +
                                                v.id + "' does not sum to 1");
    }
  }
}

void BayesNet::rebuild_topology() {
  const std::size_t n = variables_.size();
  std::vector<std::size_t> pending(n);
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t i = 0; i < n; ++i) {
    pending[i] = parent_index_[i].size();
    for (auto p : parent_index_[i]) children[p].push_back(i);
  }
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (pending[i] == 0) ready.insert(i);
  }
  topo_.clear();
  while (!ready.empty()) {
    const std::size_t i = *ready.begin();
    ready.erase(ready.begin());
    topo_.push_back(i);
    for (auto c : children[i]) {
      if (--pending[c] == 0) ready.insert(c);
    }
  }
  if (topo_.size() != n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (pending[i] != 0) {
        throw Error(ErrorCode::kInvalidModel,
                    "network has a directed cycle through '" + variables_[i].id + "'");
      }
    }
  }
}

bool BayesNet::contains(std::string_view id) const { return index_.contains(id); }

std::size_t BayesNet::index_of(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw Error(ErrorCode::kUnknownVariable, "unknown variable '" + std::string(id) + "'");
  }
  return it->second;
}

const Variable& BayesNet::variable(std::string_view id) const {
  return variables_[index_of(id)];
}

double BayesNet::entry(std::size_t var, std::span<const std::size_t> states) const {
  std::size_t row = 0;
  for (auto p : parent_index_[var]) {
    row = row * variables_[p].cardinality() + states[p];
  }
  return cpts_[var].row(row)[states[var]];
}

namespace {

constexpr std::size_t kUnobserved = std::numeric_limits<std::size_t>::max();

std::vector<std::size_t> resolve_evidence(const BayesNet& net, const Evidence& evidence) {
  std::vector<std::size_t> observed(net.size(), kUnobserved);
  for (const auto& [id, label] : evidence) {
    const std::size_t v = net.index_of(id);
    auto s = net.variable(v).state_index(label);
    if (!s) {
      throw Error(ErrorCode::kUnknownState,
                  "variable '" + id + "' has no state '" + label + "'");
    }
    observed[v] = *s;
  }
  return observed;
}

std::vector<std::size_t> resolve_assignment(const BayesNet& net,
                                            const Assignment& assignment) {
  auto states = resolve_evidence(net, assignment);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == kUnobserved) {
      throw Error(ErrorCode::kIncompleteAssignment,
                  "assignment does not cover variable '" + net.variable(i).id + "'");
    }
  }
  return states;
}

// Dense factor over ascending variable indices; first variable most significant.
struct Factor {
  std::vector<std::size_t> vars;
  std::vector<std::size_t> cards;
  std::vector<double> values;
};

std::vector<std::size_t> strides_of(const std::vector<std::size_t>& cards) {
  std::vector<std::size_t> strides(cards.size());
  std::size_t s = 1;
  for (std::size_t k = cards.size(); k-- > 0;) {
    strides[k] = s;
    s *= cards[k];
  }
  return strides;
}

// Advance a mixed-radix counter; returns false after the last assignment.
bool next_assignment(std::vector<std::size_t>& counter,
                     const std::vector<std::size_t>& cards) {
  for (std::size_t k = counter.size(); k-- > 0;) {
    if (++counter[k] < cards[k]) return true;
    counter[k] = 0;
  }
  return false;
}

Factor cpt_factor(const BayesNet& net, std::size_t var) {
  Factor f;
  f.vars = net.parent_indices(var);
  f.vars.push_back(var);
  std::sort(f.vars.begin(), f.vars.end());
  std::size_t total = 1;
  for (auto v : f.vars) {
    f.cards.push_back(net.variable(v).cardinality());
    total *= f.cards.back();
  }
  f.values.reserve(total);
  std::vector<std::size_t> states(net.size(), 0);
  std::vector<std::size_t> counter(f.vars.size(), 0);
  do {
    for (std::size_t k = 0; k < f.vars.size(); ++k) states[f.vars[k]] = counter[k];
    f.values.push_back(net.entry(var, states));
  } while (next_assignment(counter, f.cards));
  return f;
}

Factor restrict(const Factor& f, const std::vector<std::size_t>& observed) {
  Factor out;
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < f.vars.size(); ++k) {
    if (observed[f.vars[k]] == kUnobserved) {
      keep.push_back(k);
      out.vars.push_back(f.vars[k]);
      out.cards.push_back(f.cards[k]);
    }
  }
  if (keep.size() == f.vars.size()) return f;
  const auto in_strides = strides_of(f.cards);
  std::size_t base = 0;
  for (std::size_t k = 0; k < f.vars.size(); ++k) {
    if (observed[f.vars[k]] != kUnobserved) base += observed[f.vars[k]] * in_strides[k];
  }
  std::vector<std::size_t> counter(out.vars.size(), 0);
  do {
    std::size_t idx = base;
    for (std::size_t j = 0; j < keep.size(); ++j) idx += counter[j] * in_strides[keep[j]];
    out.values.push_back(f.values[idx]);
  } while (!out.vars.empty() && next_assignment(counter, out.cards));
  return out;
}

Factor multiply(const Factor& a, const Factor& b) {
  Factor out;
  std::set_union(a.vars.begin(), a.vars.end(), b.vars.begin(), b.vars.end(),
                 std::back_inserter(out.vars));
  std::vector<std::size_t> sa(out.vars.size(), 0), sb(out.vars.size(), 0);
  const auto a_strides = strides_of(a.cards);
  const auto b_strides = strides_of(b.cards);
  std::size_t total = 1;
  for (std::size_t k = 0; k < out.vars.size(); ++k) {
    const auto v = out.vars[k];
    auto ia = std::lower_bound(a.vars.begin(), a.vars.end(), v);
    auto ib = std::lower_bound(b.vars.begin(), b.vars.end(), v);
    if (ia != a.vars.end() && *ia == v) {
      const auto j = static_cast<std::size_t>(ia - a.vars.begin());
      sa[k] = a_strides[j];
      out.cards.push_back(a.cards[j]);
    }
    if (ib != b.vars.end() && *ib == v) {
      const auto j = static_cast<std::size_t>(ib - b.vars.begin());
      sb[k] = b_strides[j];
      if (out.cards.size() == k) out.cards.push_back(b.cards[j]);
    }
    total *= out.cards[k];
  }
  out.values.resize(total);
  std::vector<std::size_t> counter(out.vars.size(), 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < total; ++i) {
    out.values[i] = a.values[ia] * b.values[ib];
    for (std::size_t k = counter.size(); k-- > 0;) {
      if (++counter[k] < out.cards[k]) {
        ia += sa[k];
        ib += sb[k];
        break;
      }
      ia -= sa[k] * (out.cards[k] - 1);
      ib -= sb[k] * (out.cards[k] - 1);
      counter[k] = 0;
    }
  }
  return out;
}

Factor sum_out(const Factor& f, std::size_t var) {
  const auto pos = static_cast<std::size_t>(
      std::lower_bound(f.vars.begin(), f.vars.end(), var) - f.vars.begin());
  Factor out;
  out.vars = f.vars;
  out.cards = f.cards;
  out.vars.erase(out.vars.begin() + static_cast<std::ptrdiff_t>(pos));
  out.cards.erase(out.cards.begin() + static_cast<std::ptrdiff_t>(pos));
  const auto strides = strides_of(f.cards);
  const std::size_t inner = strides[pos];
  const std::size_t card = f.cards[pos];
  const std::size_t outer = f.values.size() / (inner * card);
  out.values.assign(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t s = 0; s < card; ++s) {
      const double* src = &f.values[(o * card + s) * inner];
      double* dst = &out.values[o * inner];
      for (std::size_t r = 0; r < inner; ++r) dst[r] += src[r];
    }
  }
  return out;
}

// Variables that can influence the query given the evidence: ancestors of the
// query and of the observed variables. Everything else is barren.
std::vector<bool> relevant_set(const BayesNet& net, std::size_t query,
                               const std::vector<std::size_t>& observed) {
  std::vector<bool> keep(net.size(), false);
  std::vector<std::size_t> stack{query};
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (observed[i] != kUnobserved) stack.push_back(i);
  }
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    if (keep[v]) continue;
    keep[v] = true;
    for (auto p : net.parent_indices(v)) stack.push_back(p);
  }
  return keep;
}

struct Plan {
  std::vector<Factor> factors;
  std::vector<std::size_t> order;
};

std::vector<std::size_t> min_fill_order(const BayesNet& net,
                                        std::vector<std::vector<std::size_t>> scopes,
                                        std::vector<std::size_t> hidden) {
  // Candidate scan in lexicographic id order gives the tie-break for free.
  std::sort(hidden.begin(), hidden.end(), [&](std::size_t a, std::size_t b) {
    return net.variable(a).id < net.variable(b).id;
  });
  std::vector<std::size_t> order;
  while (!hidden.empty()) {
    std::size_t best_pos = 0;
    std::size_t best_fill = std::numeric_limits<std::size_t>::max();
    for (std::size_t h = 0; h < hidden.size(); ++h) {
      const auto v = hidden[h];
      std::set<std::size_t> nbrs;
      for (const auto& s : scopes) {
        if (std::binary_search(s.begin(), s.end(), v)) nbrs.insert(s.begin(), s.end());
      }
      nbrs.erase(v);
      std::vector<std::size_t> nb(nbrs.begin(), nbrs.end());
      std::size_t fill = 0;
      for (std::size_t i = 0; i < nb.size(); ++i) {
        for (std::size_t j = i + 1; j < nb.size(); ++j) {
          bool adjacent = false;
          for (const auto& s : scopes) {
            if (std::binary_search(s.begin(), s.end(), nb[i]) &&
                std::binary_search(s.begin(), s.end(), nb[j])) {
              adjacent = true;
              break;
            }
          }
          if (!adjacent) ++fill;
        }
      }
      if (fill < best_fill) {
        best_fill = fill;
        best_pos = h;
      }
    }
    const auto v = hidden[best_pos];
    hidden.erase(hidden.begin() + static_cast<std::ptrdiff_t>(best_pos));
    order.push_back(v);
    std::vector<std::size_t> merged;
    std::vector<std::vector<std::size_t>> rest;
    for (auto& s : scopes) {
      if (std::binary_search(s.begin(), s.end(), v)) {
        std::vector<std::size_t> u;
        std::set_union(merged.begin(), merged.end(), s.begin(), s.end(),
                       std::back_inserter(u));
        merged = std::move(u);
      } else {
        rest.push_back(std::move(s));
      }
    }
    merged.erase(std::remove(merged.begin(), merged.end(), v), merged.end());
    rest.push_back(std::move(merged));
    scopes = std::move(rest);
  }
  return order;
}

Plan make_plan(const BayesNet& net, const std::vector<std::size_t>& observed,
               std::size_t query, bool with_values) {
  const auto keep = relevant_set(net, query, observed);
  Plan plan;
  std::vector<std::vector<std::size_t>> scopes;
  std::vector<std::size_t> hidden;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!keep[i]) continue;
    if (i != query && observed[i] == kUnobserved) hidden.push_back(i);
    std::vector<std::size_t> scope;
    if (with_values) {
      plan.factors.push_back(restrict(cpt_factor(net, i), observed));
      scope = plan.factors.back().vars;
    } else {
      scope = net.parent_indices(i);
      scope.push_back(i);
      std::sort(scope.begin(), scope.end());
      std::erase_if(scope, [&](std::size_t v) { return observed[v] != kUnobserved; });
    }
    scopes.push_back(std::move(scope));
  }
  plan.order = min_fill_order(net, std::move(scopes), std::move(hidden));
  return plan;
}

std::size_t checked_query(const BayesNet& net, const std::vector<std::size_t>& observed,
                          std::string_view query) {
  const std::size_t q = net.index_of(query);
  if (observed[q] != kUnobserved) {
    throw Error(ErrorCode::kQueryIsEvidence,
                "query variable '" + std::string(query) + "' is observed");
  }
  return q;
}

Posterior normalized(const BayesNet& net, std::size_t q, std::vector<double> weights) {
  const double z = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(z > 0.0)) {
    throw Error(ErrorCode::kInconsistentEvidence,
                "evidence has zero probability under the network");
  }
  for (auto& w : weights) w /= z;
  return Posterior{net.variable(q).id, std::move(weights)};
}

}  // namespace

double joint_probability(const BayesNet& net, std::span<const std::size_t> states) {
  if (states.size() != net.size()) {
    throw Error(ErrorCode::kIncompleteAssignment,
                "assignment covers " + std::to_string(states.size()) + " of " +
                    std::to_string(net.size()) + " variables");
  }
  double p = 1.0;
  for (std::size_t i = 0; i < net.size(); ++i) p *= net.entry(i, states);
  return p;
}

double joint_probability(const BayesNet& net, const Assignment& assignment) {
  const auto states = resolve_assignment(net, assignment);
  return joint_probability(net, std::span<const std::size_t>(states));
}

std::vector<std::string> elimination_order(const BayesNet& net, const Evidence& evidence,
                                           std::string_view query) {
  const auto observed = resolve_evidence(net, evidence);
  const auto q = checked_query(net, observed, query);
  const auto plan = make_plan(net, observed, q, false);
  std::vector<std::string> ids;
  for (auto v : plan.order) ids.push_back(net.variable(v).id);
  return ids;
}

Posterior infer(const BayesNet& net, const Evidence& evidence, std::string_view query) {
  const auto observed = resolve_evidence(net, evidence);
  const auto q = checked_query(net, observed, query);
  auto plan = make_plan(net, observed, q, true);
  auto& factors = plan.factors;
  for (auto v : plan.order) {
    std::optional<Factor> acc;
    std::vector<Factor> rest;
    for (auto& f : factors) {
      if (std::binary_search(f.vars.begin(), f.vars.end(), v)) {
        acc = acc ? multiply(*acc, f) : std::move(f);
      } else {
        rest.push_back(std::move(f));
      }
    }
    rest.push_back(sum_out(*acc, v));
    factors = std::move(rest);
  }
  Factor result{{q}, {net.variable(q).cardinality()},
                std::vector<double>(net.variable(q).cardinality(), 1.0)};
  for (const auto& f : factors) result = multiply(result, f);
  return normalized(net, q, std::move(result.values));
}

Posterior enumerate_infer(const BayesNet& net, const Evidence& evidence,
                          std::string_view query, std::size_t cap) {
  const auto observed = resolve_evidence(net, evidence);
  const auto q = checked_query(net, observed, query);
  std::vector<std::size_t> cards;
  std::size_t total = 1;
  for (const auto& v : net.variables()) {
    cards.push_back(v.cardinality());
    if (total > cap / v.cardinality()) {
      throw Error(ErrorCode::kStateSpaceTooLarge,
                  "joint state space exceeds the enumeration cap of " +
                      std::to_string(cap));
    }
    total *= v.cardinality();
  }
  std::vector<double> weights(net.variable(q).cardinality(), 0.0);
  std::vector<std::size_t> states(net.size(), 0);
  do {
    bool consistent = true;
    for (std::size_t i = 0; i < net.size(); ++i) {
      if (observed[i] != kUnobserved && observed[i] != states[i]) {
        consistent = false;
        break;
      }
    }
    if (consistent) weights[states[q]] += joint_probability(net, states);
  } while (next_assignment(states, cards));
  return normalized(net, q, std::move(weights));
}

}  // namespace riskdesk::pgm
