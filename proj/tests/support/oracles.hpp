// Random model generators and brute-force oracles shared by the unit tests
// and the acceptance gate. Oracles here avoid the library's algorithms: they
// walk trees directly and enumerate strategies exhaustively.
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "riskdesk/decision.hpp"
#include "riskdesk/fault_tree.hpp"
#include "riskdesk/pgm.hpp"
#include "riskdesk/rng.hpp"

namespace oracle {

using riskdesk::decision::Matrix;
using riskdesk::decision::Vector;

struct Rand {
  explicit Rand(std::uint64_t seed) : stream(seed) {}
  riskdesk::rng::Stream stream;

  double uniform() { return stream.uniform(); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * stream.uniform(); }
  std::size_t below(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(stream.uniform() * static_cast<double>(n)));
  }
  bool coin(double p = 0.5) { return stream.uniform() < p; }

  std::vector<double> simplex(std::size_t n, double zero_rate = 0.0) {
    std::vector<double> v(n);
    double s = 0.0;
    for (auto& x : v) {
      x = coin(zero_rate) ? 0.0 : -std::log(1.0 - uniform());
      s += x;
    }
    if (s == 0.0) {
      v[below(n)] = 1.0;
      return v;
    }
    for (auto& x : v) x /= s;
    return v;
  }

  Matrix stochastic(std::size_t rows, std::size_t cols, double zero_rate = 0.0) {
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto row = simplex(cols, zero_rate);
      for (std::size_t c = 0; c < cols; ++c) m(r, c) = row[c];
    }
    return m;
  }
};

// ---------------------------------------------------------------------------
// Bayesian networks

inline riskdesk::pgm::BayesNet random_binary_bn(Rand& r, std::size_t max_vars = 12,
                                                std::size_t max_parents = 3) {
  const std::size_t n = 1 + r.below(max_vars);
  std::vector<riskdesk::pgm::Variable> vars;
  std::vector<riskdesk::pgm::Cpt> cpts;
  for (std::size_t i = 0; i < n; ++i) {
    vars.push_back({"v" + std::to_string(i), {"f", "t"}});
    std::vector<std::string> parents;
    std::vector<std::size_t> pool(i);
    for (std::size_t j = 0; j < i; ++j) pool[j] = j;
    const std::size_t k = std::min(i, r.below(max_parents + 1));
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t pick = r.below(pool.size());
      parents.push_back("v" + std::to_string(pool[pick]));
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    std::vector<std::vector<double>> rows(std::size_t{1} << parents.size());
    for (auto& row : rows) {
      // Some deterministic rows so that zero-mass evidence shows up too.
      row = r.coin(0.15) ? (r.coin() ? std::vector<double>{1.0, 0.0}
                                     : std::vector<double>{0.0, 1.0})
                         : r.simplex(2);
    }
    cpts.emplace_back("v" + std::to_string(i), parents, rows);
  }
  // Shuffle declaration order: build() must not depend on it.
  for (std::size_t i = n; i > 1; --i) std::swap(vars[i - 1], vars[r.below(i)]);
  return riskdesk::pgm::BayesNet::build(std::move(vars), std::move(cpts));
}

// ---------------------------------------------------------------------------
// Fault trees

/// Direct recursive evaluation, independent of the library evaluator.
inline bool tree_failed(const riskdesk::fault_tree::FaultTree& tree,
                        const std::map<std::string, bool>& event_failed) {
  std::function<bool(const std::string&)> eval = [&](const std::string& id) -> bool {
    auto e = event_failed.find(id);
    if (e != event_failed.end()) return e->second;
    for (const auto& g : tree.gates) {
      if (g.id != id) continue;
      std::size_t failed = 0;
      for (const auto& in : g.inputs) failed += eval(in) ? 1 : 0;
      switch (g.kind) {
        case riskdesk::fault_tree::GateKind::kAnd: return failed == g.inputs.size();
        case riskdesk::fault_tree::GateKind::kOr: return failed >= 1;
        case riskdesk::fault_tree::GateKind::kKofN: return failed >= static_cast<std::size_t>(g.k);
      }
    }
    throw std::logic_error("dangling reference " + id);
  };
  return eval(tree.top);
}

/// Random tree text over leaves e0..e{n-1} bound to variables x0..x{n-1}.
/// Gates only reference earlier nodes, so the result is acyclic; the top
/// gate reaches every node.
inline std::string random_tree_text(Rand& r, std::size_t max_leaves = 10) {
  const std::size_t leaves = 1 + r.below(max_leaves);
  std::string text = "tree random\n";
  std::vector<std::string> open;
  for (std::size_t i = 0; i < leaves; ++i) {
    text += "event e" + std::to_string(i) + " binds x" + std::to_string(i) + " failed {failed}\n";
    open.push_back("e" + std::to_string(i));
  }
  std::size_t g = 0;
  auto gate = [&](std::vector<std::string> inputs) {
    const std::string id = "g" + std::to_string(g++);
    std::string body;
    const std::size_t kind = r.below(3);
    if (kind == 0) {
      body = "AND(";
    } else if (kind == 1) {
      body = "OR(";
    } else {
      body = "KOFN(" + std::to_string(1 + r.below(inputs.size())) + "; ";
    }
    for (std::size_t i = 0; i < inputs.size(); ++i) body += (i ? ", " : "") + inputs[i];
    text += "gate " + id + " = " + body + ")\n";
    return id;
  };
  // Occasionally reuse a node as input to two gates (shared events).
  while (open.size() > 1 || g == 0) {
    const std::size_t k = std::min(open.size(), 1 + r.below(std::min<std::size_t>(4, open.size())));
    std::vector<std::string> inputs;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t pick = r.below(open.size());
      inputs.push_back(open[pick]);
      open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    if (!open.empty() && r.coin(0.2)) {
      const auto extra = open[r.below(open.size())];
      if (std::find(inputs.begin(), inputs.end(), extra) == inputs.end()) inputs.push_back(extra);
    }
    open.push_back(gate(inputs));
  }
  text += "top " + open.front() + "\n";
  return text;
}

// ---------------------------------------------------------------------------
// Decision models

/// Raw tables of a one-slice influence diagram, kept next to the library
/// model built from them.
struct RandomModel {
  riskdesk::decision::HealthStateSpace health;
  riskdesk::fault_tree::FaultTree tree;
  bool discriminative = false;
  Vector prior;            // generative
  Matrix likelihood;       // generative, |H| x |nu|
  Vector symbol_prior;     // discriminative
  Matrix posterior;        // discriminative, |nu| x |H|
  std::vector<Matrix> transition;
  Vector u_action;
  Vector u_now;
  Vector u_next;
  std::vector<std::string> actions;
  std::vector<std::string> symbols;
  std::shared_ptr<const riskdesk::decision::DecisionModel> model;
};

/// P(failed | h) by walking the tree on the decoded health state.
inline Vector tree_failure(const riskdesk::decision::HealthStateSpace& health,
                           const riskdesk::fault_tree::FaultTree& tree) {
  Vector pf(static_cast<Eigen::Index>(health.size()));
  for (std::size_t h = 0; h < health.size(); ++h) {
    const auto states = health.decode(h);
    std::map<std::string, bool> ev;
    for (const auto& e : tree.events) {
      std::size_t c = 0;
      while (health.components()[c].variable != e.binding.variable) ++c;
      const auto& label = health.components()[c].states[states[c]];
      ev[e.id] = std::find(e.binding.failed_states.begin(), e.binding.failed_states.end(),
                           label) != e.binding.failed_states.end();
    }
    pf(static_cast<Eigen::Index>(h)) = tree_failed(tree, ev) ? 1.0 : 0.0;
  }
  return pf;
}

inline std::shared_ptr<const riskdesk::decision::DecisionModel> build(RandomModel& m) {
  using namespace riskdesk::decision;
  auto classifier = m.discriminative
                        ? ClassifierModel::discriminative(m.symbols, m.posterior, m.symbol_prior)
                        : ClassifierModel::generative(m.symbols, m.prior, m.likelihood);
  auto failure = std::make_shared<const FailureModel>(FailureModel::compile(m.health, m.tree));
  UtilityModel u;
  u.action = m.u_action;
  u.failure_now = m.u_now;
  u.failure_next = m.u_next;
  m.model = std::make_shared<const DecisionModel>(m.health, classifier,
                                                  TransitionModel::dense(m.transition), failure,
                                                  u, m.actions);
  return m.model;
}

/// |H| <= 8, |nu| <= 4, |D| <= 4. Some models duplicate an action (exact
/// ties), put zeros in the classifier (impossible symbols), or use the
/// discriminative form.
inline RandomModel random_model(Rand& r) {
  static const std::vector<std::vector<std::size_t>> shapes = {
      {2}, {3}, {4}, {2, 2}, {2, 3}, {3, 2}, {2, 4}, {4, 2}, {2, 2, 2}};
  const auto& shape = shapes[r.below(shapes.size())];
  std::vector<riskdesk::decision::HealthComponent> comps;
  std::string text = "tree m\n";
  std::vector<std::string> events;
  for (std::size_t c = 0; c < shape.size(); ++c) {
    riskdesk::decision::HealthComponent hc{"c" + std::to_string(c), {"ok"}};
    for (std::size_t s = 1; s < shape[c]; ++s) hc.states.push_back("s" + std::to_string(s));
    std::string failed;
    for (std::size_t s = 1; s < shape[c]; ++s) {
      if (s + 1 == shape[c] || r.coin(0.4)) failed += (failed.empty() ? "" : ", ") + hc.states[s];
    }
    text += "event e" + std::to_string(c) + " binds " + hc.variable + " failed {" + failed + "}\n";
    events.push_back("e" + std::to_string(c));
    comps.push_back(std::move(hc));
  }
  const std::size_t kind = r.below(3);
  std::string joined;
  for (std::size_t i = 0; i < events.size(); ++i) joined += (i ? ", " : "") + events[i];
  if (kind == 0) {
    text += "gate top = OR(" + joined + ")\n";
  } else if (kind == 1) {
    text += "gate top = AND(" + joined + ")\n";
  } else {
    text += "gate top = KOFN(" + std::to_string(1 + r.below(events.size())) + "; " + joined + ")\n";
  }
  text += "top top\n";

  RandomModel m;
  m.health = riskdesk::decision::HealthStateSpace(comps);
  m.tree = riskdesk::fault_tree::parse_fault_tree(text);
  const std::size_t nh = m.health.size();
  const std::size_t nv = 1 + r.below(4);
  std::size_t nd = 1 + r.below(4);
  for (std::size_t v = 0; v < nv; ++v) m.symbols.push_back("o" + std::to_string(v));
  m.discriminative = r.coin(0.25);
  const double zero_rate = r.coin(0.3) ? 0.4 : 0.0;
  if (m.discriminative) {
    const auto sp = r.simplex(nv, zero_rate);
    m.symbol_prior = Eigen::Map<const Vector>(sp.data(), static_cast<Eigen::Index>(nv));
    m.posterior = r.stochastic(nv, nh, zero_rate);
  } else {
    const auto p = r.simplex(nh, zero_rate);
    m.prior = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(nh));
    m.likelihood = r.stochastic(nh, nv, zero_rate);
  }
  const bool duplicate = nd >= 2 && r.coin(0.3);
  m.u_action.resize(static_cast<Eigen::Index>(nd));
  for (std::size_t d = 0; d < nd; ++d) {
    m.actions.push_back("a" + std::to_string(d));
    if (duplicate && d == nd - 1) {
      m.transition.push_back(m.transition[0]);
      m.u_action(static_cast<Eigen::Index>(d)) = m.u_action(0);
    } else {
      m.transition.push_back(r.stochastic(nh, nh, zero_rate));
      m.u_action(static_cast<Eigen::Index>(d)) = r.uniform(-10.0, 10.0);
    }
  }
  m.u_now = Vector(2);
  m.u_now << r.uniform(-5.0, 5.0), r.uniform(-20.0, 0.0);
  m.u_next = Vector(2);
  m.u_next << r.uniform(-5.0, 5.0), r.uniform(-20.0, 0.0);
  build(m);
  return m;
}

struct StrategyResult {
  double value = 0.0;
  std::vector<std::size_t> action_of;
};

/// Enumerates every map symbol -> action for the best value. The strategy
/// returned picks, per symbol, the first action inside the tie band; for
/// symbols that cannot occur every action ties and the first is taken.
inline StrategyResult exhaustive_policy(const RandomModel& m, double tie = 1e-12) {
  const std::size_t nh = m.health.size();
  const std::size_t nv = m.symbols.size();
  const std::size_t nd = m.actions.size();
  const Vector pf = tree_failure(m.health, m.tree);
  auto euf = [&](const Vector& u, std::size_t h) {
    return (1.0 - pf(static_cast<Eigen::Index>(h))) * u(0) + pf(static_cast<Eigen::Index>(h)) * u(1);
  };
  // joint(h, v) = P(H = h, nu = v)
  Matrix joint(nh, nv);
  for (std::size_t h = 0; h < nh; ++h) {
    for (std::size_t v = 0; v < nv; ++v) {
      joint(h, v) = m.discriminative ? m.symbol_prior(v) * m.posterior(v, h)
                                     : m.prior(h) * m.likelihood(h, v);
    }
  }
  // term(v, d) = sum_h P(h, v) [U_d + euf_now(h) + sum_h' T_d(h, h') euf_next(h')]
  Matrix term = Matrix::Zero(nv, nd);
  for (std::size_t v = 0; v < nv; ++v) {
    for (std::size_t d = 0; d < nd; ++d) {
      for (std::size_t h = 0; h < nh; ++h) {
        double next = 0.0;
        for (std::size_t h2 = 0; h2 < nh; ++h2) next += m.transition[d](h, h2) * euf(m.u_next, h2);
        term(v, d) += joint(h, v) * (m.u_action(d) + euf(m.u_now, h) + next);
      }
    }
  }
  std::size_t count = 1;
  for (std::size_t v = 0; v < nv; ++v) count *= nd;
  double best = -INFINITY;
  for (std::size_t s = 0; s < count; ++s) {
    std::size_t code = s;
    double total = 0.0;
    for (std::size_t v = nv; v-- > 0;) {
      total += term(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(code % nd));
      code /= nd;
    }
    best = std::max(best, total);
  }
  StrategyResult out;
  out.value = best;
  // Per-symbol tie band, on conditional values.
  for (std::size_t v = 0; v < nv; ++v) {
    const double pv = joint.col(static_cast<Eigen::Index>(v)).sum();
    std::size_t pick = 0;
    if (pv > 0.0) {
      double top = -INFINITY;
      for (std::size_t d = 0; d < nd; ++d) top = std::max(top, term(v, d) / pv);
      const double band = tie * std::max(1.0, std::abs(top));
      while (term(v, pick) / pv < top - band) ++pick;
    }
    out.action_of.push_back(pick);
  }
  return out;
}

}  // namespace oracle
