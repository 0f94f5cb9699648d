#include "riskdesk/fault_tree.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

#include "riskdesk/error.hpp"

namespace riskdesk::fault_tree {

std::size_t Gate::threshold() const {
  switch (kind) {
    case GateKind::kAnd: return inputs.size();
    case GateKind::kOr: return 1;
    case GateKind::kKofN: return static_cast<std::size_t>(k);
  }
  return 1;
}

Bindings FaultTree::bindings() const {
  Bindings out;
  for (const auto& e : events) out.emplace(e.id, e.binding);
  return out;
}

const Gate* FaultTree::find_gate(std::string_view id) const {
  for (const auto& g : gates) {
    if (g.id == id) return &g;
  }
  return nullptr;
}

const BasicEvent* FaultTree::find_event(std::string_view id) const {
  for (const auto& e : events) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

bool operator==(const FaultTree& a, const FaultTree& b) {
  if (a.name != b.name || a.top != b.top || a.events.size() != b.events.size() ||
      a.gates.size() != b.gates.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    if (a.events[i].id != b.events[i].id || a.events[i].binding != b.events[i].binding) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.gates.size(); ++i) {
    const auto& x = a.gates[i];
    const auto& y = b.gates[i];
    if (x.id != y.id || x.kind != y.kind || x.inputs != y.inputs ||
        (x.kind == GateKind::kKofN && x.k != y.k)) {
      return false;
    }
  }
  return true;
}

namespace {

enum class Tok { kIdent, kNumber, kPunct, kEnd };

struct Token {
  Tok kind;
  std::string text;
  int column;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

std::vector<Token> lex_line(std::string_view line, int line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    const int col = static_cast<int>(i) + 1;
    if (c == '#') break;
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
    } else if (ident_start(c)) {
      std::size_t j = i;
      while (j < line.size() && ident_char(line[j])) ++j;
      out.push_back({Tok::kIdent, std::string(line.substr(i, j - i)), col});
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
      out.push_back({Tok::kNumber, std::string(line.substr(i, j - i)), col});
      i = j;
    } else if (std::string_view("=(),;{}").find(c) != std::string_view::npos) {
      out.push_back({Tok::kPunct, std::string(1, c), col});
      ++i;
    } else {
      throw ParseError(ErrorCode::kSyntax,
                       "unexpected character '" + std::string(1, c) + "'", line_no, col);
    }
  }
  out.push_back({Tok::kEnd, "", static_cast<int>(line.size()) + 1});
  return out;
}

class LineParser {
 public:
  LineParser(std::vector<Token> tokens, int line) : toks_(std::move(tokens)), line_(line) {}

  const Token& peek() const { return toks_[pos_]; }
  bool at_end() const { return peek().kind == Tok::kEnd; }

  [[noreturn]] void fail(const std::string& what) const {
    const auto& t = peek();
    throw ParseError(ErrorCode::kSyntax,
                     what + (t.kind == Tok::kEnd ? " at end of line"
                                                 : ", found '" + t.text + "'"),
                     line_, t.column);
  }

  Token identifier(const char* what) {
    if (peek().kind != Tok::kIdent) fail(std::string("expected ") + what);
    return toks_[pos_++];
  }

  void keyword(const char* kw) {
    if (peek().kind != Tok::kIdent || peek().text != kw) {
      fail(std::string("expected '") + kw + "'");
    }
    ++pos_;
  }

  void punct(char p) {
    if (peek().kind != Tok::kPunct || peek().text[0] != p) {
      fail(std::string("expected '") + p + "'");
    }
    ++pos_;
  }

  bool try_punct(char p) {
    if (peek().kind == Tok::kPunct && peek().text[0] == p) {
      ++pos_;
      return true;
    }
    return false;
  }

  Token number() {
    if (peek().kind != Tok::kNumber) fail("expected an integer");
    return toks_[pos_++];
  }

  void finish() {
    if (!at_end()) fail("unexpected trailing input");
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int line_;
};

struct RefSite {
  std::string id;
  int line;
  int column;
};

// First gate found to close a cycle, if any.
const Gate* find_cycle(const FaultTree& tree) {
  std::map<std::string, int> color;  // 0 white, 1 grey, 2 black
  std::function<const Gate*(const Gate&)> visit = [&](const Gate& g) -> const Gate* {
    color[g.id] = 1;
    for (const auto& in : g.inputs) {
      const Gate* child = tree.find_gate(in);
      if (!child) continue;
      const int c = color[child->id];
      if (c == 1) return child;
      if (c == 0) {
        if (const Gate* hit = visit(*child)) return hit;
      }
    }
    color[g.id] = 2;
    return nullptr;
  };
  for (const auto& g : tree.gates) {
    if (color[g.id] == 0) {
      if (const Gate* hit = visit(g)) return hit;
    }
  }
  return nullptr;
}

}  // namespace

FaultTree parse_fault_tree(std::string_view text) {
  FaultTree tree;
  std::vector<RefSite> refs;
  std::set<std::string> ids;
  std::optional<RefSite> top_site;
  bool have_tree = false;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    LineParser p(lex_line(line, line_no), line_no);
    if (p.at_end()) continue;
    const Token head = p.identifier("a statement keyword");
    auto declare = [&](const Token& id) {
      if (!ids.insert(id.text).second) {
        throw ParseError(ErrorCode::kSyntax, "duplicate identifier '" + id.text + "'",
                         line_no, id.column);
      }
    };
    // Gate expression after "<id> =".
    auto parse_gate = [&](const Token& id) {
      const Token kind = p.identifier("AND, OR or KOFN");
      Gate g;
      g.id = id.text;
      g.line = line_no;
      if (kind.text == "AND") {
        g.kind = GateKind::kAnd;
      } else if (kind.text == "OR") {
        g.kind = GateKind::kOr;
      } else if (kind.text == "KOFN") {
        g.kind = GateKind::kKofN;
      } else {
        throw ParseError(ErrorCode::kSyntax, "unknown gate kind '" + kind.text + "'",
                         line_no, kind.column);
      }
      p.punct('(');
      std::optional<Token> k_tok;
      if (g.kind == GateKind::kKofN) {
        k_tok = p.number();
        p.punct(';');
      }
      do {
        const Token ref = p.identifier("an input reference");
        refs.push_back({ref.text, line_no, ref.column});
        g.inputs.push_back(ref.text);
      } while (p.try_punct(','));
      p.punct(')');
      if (k_tok) {
        const auto& digits = k_tok->text;
        const long k = digits.size() > 9 ? -1 : std::stol(digits);
        if (k < 1 || static_cast<std::size_t>(k) > g.inputs.size()) {
          throw ParseError(ErrorCode::kBadK,
                           "KOFN gate '" + g.id + "' needs 1 <= k <= " +
                               std::to_string(g.inputs.size()) + ", got " + digits,
                           line_no, k_tok->column);
        }
        g.k = static_cast<int>(k);
      }
      declare(id);
      tree.gates.push_back(std::move(g));
    };
    if (head.text == "tree") {
      if (have_tree) {
        throw ParseError(ErrorCode::kSyntax, "second 'tree' statement", line_no, head.column);
      }
      tree.name = p.identifier("a tree name").text;
      have_tree = true;
    } else if (head.text == "event") {
      const Token id = p.identifier("an event id");
      p.keyword("binds");
      BasicEvent ev{id.text, {p.identifier("a variable id").text, {}}, line_no};
      p.keyword("failed");
      p.punct('{');
      do {
        const Token s = p.identifier("a state label");
        auto& fs = ev.binding.failed_states;
        if (std::find(fs.begin(), fs.end(), s.text) != fs.end()) {
          throw ParseError(ErrorCode::kSyntax, "state '" + s.text + "' listed twice",
                           line_no, s.column);
        }
        fs.push_back(s.text);
      } while (p.try_punct(','));
      p.punct('}');
      declare(id);
      tree.events.push_back(std::move(ev));
    } else if (head.text == "gate") {
      const Token id = p.identifier("a gate id");
      p.punct('=');
      parse_gate(id);
    } else if (head.text == "top") {
      if (top_site) {
        throw ParseError(ErrorCode::kSyntax, "second 'top' statement", line_no, head.column);
      }
      const Token id = p.identifier("a gate id");
      top_site = RefSite{id.text, line_no, id.column};
      tree.top = id.text;
      // Shorthand: "top F = OR(...)" declares the gate in place.
      if (p.try_punct('=')) parse_gate(id);
    } else {
      throw ParseError(ErrorCode::kSyntax, "unknown statement '" + head.text + "'", line_no,
                       head.column);
    }
    p.finish();
  }
  if (!have_tree) throw ParseError(ErrorCode::kSyntax, "missing 'tree' statement", 1, 1);
  if (!top_site) throw ParseError(ErrorCode::kSyntax, "missing 'top' statement", line_no, 1);
  for (const auto& r : refs) {
    if (!ids.contains(r.id)) {
      throw ParseError(ErrorCode::kUnknownReference,
                       "unknown reference '" + r.id + "' (line " + std::to_string(r.line) + ")",
                       r.line, r.column);
    }
  }
  if (!tree.find_gate(tree.top)) {
    const auto code = ids.contains(tree.top) ? ErrorCode::kSyntax : ErrorCode::kUnknownReference;
    throw ParseError(code, "top '" + tree.top + "' is not a declared gate (line " +
                               std::to_string(top_site->line) + ")",
                     top_site->line, top_site->column);
  }
  if (const Gate* g = find_cycle(tree)) {
    throw ParseError(ErrorCode::kCycle, "cycle detected at gate '" + g->id + "'", g->line, 1);
  }
  return tree;
}

std::string print_fault_tree(const FaultTree& tree) {
  std::ostringstream out;
  out << "tree " << tree.name << "\n";
  for (const auto& e : tree.events) {
    out << "event " << e.id << " binds " << e.binding.variable << " failed {";
    for (std::size_t i = 0; i < e.binding.failed_states.size(); ++i) {
      out << (i ? ", " : "") << e.binding.failed_states[i];
    }
    out << "}\n";
  }
  for (const auto& g : tree.gates) {
    out << "gate " << g.id << " = ";
    switch (g.kind) {
      case GateKind::kAnd: out << "AND("; break;
      case GateKind::kOr: out << "OR("; break;
      case GateKind::kKofN: out << "KOFN(" << g.k << "; "; break;
    }
    for (std::size_t i = 0; i < g.inputs.size(); ++i) out << (i ? ", " : "") << g.inputs[i];
    out << ")\n";
  }
  out << "top " << tree.top << "\n";
  return out.str();
}

void validate(const FaultTree& tree) {
  std::set<std::string> ids;
  for (const auto& e : tree.events) {
    if (!ids.insert(e.id).second) {
      throw Error(ErrorCode::kInvalidModel, "duplicate identifier '" + e.id + "'");
    }
    if (e.binding.failed_states.empty()) {
      throw Error(ErrorCode::kInvalidModel, "event '" + e.id + "' has no failed states");
    }
  }
  for (const auto& g : tree.gates) {
    if (!ids.insert(g.id).second) {
      throw Error(ErrorCode::kInvalidModel, "duplicate identifier '" + g.id + "'");
    }
  }
  for (const auto& g : tree.gates) {
    if (g.inputs.empty()) {
      throw Error(ErrorCode::kInvalidModel, "gate '" + g.id + "' has no inputs");
    }
    if (g.kind == GateKind::kKofN &&
        (g.k < 1 || static_cast<std::size_t>(g.k) > g.inputs.size())) {
      throw Error(ErrorCode::kBadK, "KOFN gate '" + g.id + "' has k out of range");
    }
    for (const auto& in : g.inputs) {
      if (!ids.contains(in)) {
        throw Error(ErrorCode::kUnknownReference,
                    "unknown reference '" + in + "' in gate '" + g.id + "'");
      }
    }
  }
  if (!tree.find_gate(tree.top)) {
    throw Error(ErrorCode::kUnknownReference, "top '" + tree.top + "' is not a declared gate");
  }
  if (const Gate* g = find_cycle(tree)) {
    throw Error(ErrorCode::kCycle, "cycle detected at gate '" + g->id + "'");
  }
}

std::vector<std::string> gate_order(const FaultTree& tree) {
  std::vector<std::string> order;
  std::set<std::string> done;
  std::function<void(const Gate&)> visit = [&](const Gate& g) {
    if (done.contains(g.id)) return;
    done.insert(g.id);
    for (const auto& in : g.inputs) {
      if (const Gate* child = tree.find_gate(in)) visit(*child);
    }
    order.push_back(g.id);
  };
  for (const auto& g : tree.gates) visit(g);
  return order;
}

pgm::BayesNet default_base(const FaultTree& tree) {
  std::vector<std::string> var_order;
  std::map<std::string, std::vector<std::string>> states;
  for (const auto& e : tree.events) {
    auto [it, fresh] = states.try_emplace(e.binding.variable,
                                          std::vector<std::string>{kOk});
    if (fresh) var_order.push_back(e.binding.variable);
    for (const auto& s : e.binding.failed_states) {
      if (s == kOk) {
        throw Error(ErrorCode::kInvalidModel,
                    "event '" + e.id + "' counts state 'ok' as failed; supply a base network");
      }
      if (std::find(it->second.begin(), it->second.end(), s) == it->second.end()) {
        it->second.push_back(s);
      }
    }
  }
  pgm::BayesNet base;
  for (const auto& v : var_order) {
    const auto& st = states[v];
    const double u = 1.0 / static_cast<double>(st.size());
    base.add(pgm::Variable{v, st}, pgm::Cpt(v, {}, {std::vector<double>(st.size(), u)}));
  }
  return base;
}

pgm::BayesNet compile_to_bn(const FaultTree& tree, const Bindings& bindings,
                            const pgm::BayesNet& base) {
  validate(tree);
  pgm::BayesNet net = base;
  const std::vector<std::string> binary{kOk, kFailed};
  auto claim = [&](const std::string& id) {
    if (net.contains(id)) {
      throw Error(ErrorCode::kMergeConflict,
                  "variable '" + id + "' already exists in the base network");
    }
  };
  for (const auto& e : tree.events) {
    auto it = bindings.find(e.id);
    if (it == bindings.end()) {
      throw Error(ErrorCode::kUnboundEvent, "basic event '" + e.id + "' has no binding");
    }
    const auto& b = it->second;
    if (!net.contains(b.variable)) {
      throw Error(ErrorCode::kUnboundEvent,
                  "event '" + e.id + "' binds undeclared variable '" + b.variable + "'");
    }
    const auto& hv = net.variable(b.variable);
    std::vector<bool> failed(hv.cardinality(), false);
    for (const auto& s : b.failed_states) {
      auto idx = hv.state_index(s);
      if (!idx) {
        throw Error(ErrorCode::kUnknownState,
                    "variable '" + hv.id + "' has no state '" + s + "' (event '" + e.id + "')");
      }
      failed[*idx] = true;
    }
    const auto n_failed = std::count(failed.begin(), failed.end(), true);
    if (n_failed == 0 || static_cast<std::size_t>(n_failed) == hv.cardinality()) {
      throw Error(ErrorCode::kInvalidModel, "failed states of event '" + e.id +
                                                "' must be a nonempty strict subset");
    }
    claim(e.id);
    std::vector<std::vector<double>> rows;
    for (bool f : failed) rows.push_back(f ? std::vector<double>{0.0, 1.0}
                                           : std::vector<double>{1.0, 0.0});
    net.add(pgm::Variable{e.id, binary}, pgm::Cpt(e.id, {b.variable}, std::move(rows)));
  }
  for (const auto& id : gate_order(tree)) {
    const Gate& g = *tree.find_gate(id);
    if (g.inputs.size() > kMaxCompiledFanIn) {
      throw Error(ErrorCode::kInvalidModel,
                  "gate '" + g.id + "' has " + std::to_string(g.inputs.size()) +
                      " inputs; at most " + std::to_string(kMaxCompiledFanIn) +
                      " can be compiled to a CPT");
    }
    claim(g.id);
    const std::size_t n = g.inputs.size();
    const std::size_t need = g.threshold();
    std::vector<std::vector<double>> rows;
    rows.reserve(std::size_t{1} << n);
    for (std::size_t combo = 0; combo < (std::size_t{1} << n); ++combo) {
      // Bit (n-1-i) of combo is input i: first input most significant.
      const auto count = static_cast<std::size_t>(std::popcount(combo));
      rows.push_back(count >= need ? std::vector<double>{0.0, 1.0}
                                   : std::vector<double>{1.0, 0.0});
    }
    net.add(pgm::Variable{g.id, binary}, pgm::Cpt(g.id, g.inputs, std::move(rows)));
  }
  return net;
}

pgm::BayesNet compile_to_bn(const FaultTree& tree, const pgm::BayesNet& base) {
  return compile_to_bn(tree, tree.bindings(), base);
}

double failure_probability(const pgm::BayesNet& net, const pgm::Evidence& evidence,
                           std::string_view top) {
  const auto& var = net.variable(top);
  const auto idx = var.state_index(kFailed);
  if (!idx) {
    throw Error(ErrorCode::kUnknownState, "variable '" + var.id + "' has no 'failed' state");
  }
  return pgm::infer(net, evidence, top).distribution[*idx];
}

bool evaluate(const FaultTree& tree, const std::map<std::string, bool>& event_failed) {
  std::map<std::string, bool> memo;
  std::function<bool(const std::string&)> value = [&](const std::string& id) -> bool {
    if (auto it = event_failed.find(id); it != event_failed.end()) return it->second;
    if (auto it = memo.find(id); it != memo.end()) return it->second;
    const Gate* g = tree.find_gate(id);
    if (!g) {
      throw Error(ErrorCode::kUnknownReference, "no value for event '" + id + "'");
    }
    std::size_t failed = 0;
    for (const auto& in : g->inputs) failed += value(in) ? 1 : 0;
    return memo[id] = failed >= g->threshold();
  };
  return value(tree.top);
}

bool evaluate_states(const FaultTree& tree,
                     const std::map<std::string, std::string>& variable_states) {
  std::map<std::string, bool> failed;
  for (const auto& e : tree.events) {
    auto it = variable_states.find(e.binding.variable);
    if (it == variable_states.end()) {
      throw Error(ErrorCode::kUnknownVariable,
                  "no state for variable '" + e.binding.variable + "'");
    }
    const auto& fs = e.binding.failed_states;
    failed[e.id] = std::find(fs.begin(), fs.end(), it->second) != fs.end();
  }
  return evaluate(tree, failed);
}

}  // namespace riskdesk::fault_tree
