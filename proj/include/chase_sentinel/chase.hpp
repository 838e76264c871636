#pragma once

#include <deque>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "matcher.hpp"
#include "util.hpp"

namespace sentinel {

struct ChaseBudget {
  std::size_t max_vertices = 100000;
  std::size_t max_depth = 10000;
  uint32_t max_term_depth = 64;
  Deadline deadline;
};

enum class ChaseStatus { Complete, BudgetExhausted };

inline const char* to_string(ChaseStatus s) { return s == ChaseStatus::Complete ? "complete" : "budget-exhausted"; }

struct ChaseVertex {
  long parent = -1;
  std::vector<uint32_t> children;
  std::optional<Trigger> trigger;  // trigger whose output produced this vertex
  uint32_t disjunct = 0;
  std::vector<Atom> added;  // facts new relative to the parent label
  uint32_t depth = 0;
  bool leaf = false;     // label satisfies every rule
  bool aborted = false;  // expansion stopped by the budget
};

class ChaseTree {
 public:
  std::vector<ChaseVertex> vertices;
  ChaseStatus status = ChaseStatus::Complete;

  uint32_t root() const { return 0; }
  std::size_t size() const { return vertices.size(); }
  const ChaseVertex& operator[](std::size_t v) const { return vertices[v]; }

  FactSet label(uint32_t v) const {
    std::vector<uint32_t> path;
    for (long u = v; u >= 0; u = vertices[u].parent) path.push_back(static_cast<uint32_t>(u));
    FactSet out;
    for (auto it = path.rbegin(); it != path.rend(); ++it) out.insert_all(vertices[*it].added);
    return out;
  }

  std::vector<uint32_t> leaves() const {
    std::vector<uint32_t> out;
    for (uint32_t v = 0; v < vertices.size(); ++v)
      if (vertices[v].children.empty()) out.push_back(v);
    return out;
  }
};

namespace detail {

struct BranchState {
  uint32_t vertex = 0;
  FactSet facts;
  std::deque<Trigger> datalog;
  std::deque<Trigger> other;
  std::unordered_set<Trigger, TriggerHash> seen;

  void discover(const RuleSet& rules, const std::vector<Atom>& fresh) {
    for (const auto& f : fresh)
      for (const auto& r : rules)
        triggers_using(r, f, facts, [&](Trigger t) {
          if (seen.insert(t).second) (r.datalog() ? datalog : other).push_back(std::move(t));
          return true;
        });
  }

  // next loaded trigger that is not obsolete, datalog triggers first
  std::optional<Trigger> next() {
    for (auto* q : {&datalog, &other})
      while (!q->empty()) {
        Trigger t = std::move(q->front());
        q->pop_front();
        if (!is_obsolete(t, facts)) return t;
      }
    return std::nullopt;
  }
};

}  // namespace detail

// Restricted disjunctive chase. Triggers are scheduled FIFO per branch with
// datalog triggers drained first; branches are expanded depth-first.
inline ChaseTree run_chase(const RuleSet& rules, const FactSet& database, const ChaseBudget& budget = {}) {
  if (budget.max_vertices == 0 || budget.max_depth == 0 || budget.max_term_depth == 0)
    throw Error("chase budget must be positive");
  for (const auto& f : database)
    if (!f.ground() || std::any_of(f.args.begin(), f.args.end(), [](Term t) { return t.is_functional(); }))
      throw Error("database must be function-free and ground");

  ChaseTree tree;
  tree.vertices.emplace_back();
  tree.vertices[0].added = database.atoms();

  std::vector<detail::BranchState> stack;
  {
    detail::BranchState root;
    root.facts = database;
    root.discover(rules, database.atoms());
    stack.push_back(std::move(root));
  }

  bool stop = false;
  auto exhaust = [&](uint32_t v) {
    tree.vertices[v].aborted = true;
    tree.status = ChaseStatus::BudgetExhausted;
  };

  while (!stack.empty()) {
    detail::BranchState st = std::move(stack.back());
    stack.pop_back();
    if (stop) {
      exhaust(st.vertex);
      continue;
    }
    for (;;) {
      if (budget.deadline.expired()) {
        exhaust(st.vertex);
        stop = true;
        break;
      }
      auto trig = st.next();
      if (!trig) {
        tree.vertices[st.vertex].leaf = true;
        break;
      }
      uint32_t depth = tree.vertices[st.vertex].depth + 1;
      std::size_t n = trig->rule->branching();
      if (depth > budget.max_depth) {
        exhaust(st.vertex);
        break;
      }
      if (tree.vertices.size() + n > budget.max_vertices) {
        exhaust(st.vertex);
        stop = true;
        break;
      }
      std::vector<uint32_t> kids;
      std::vector<bool> too_deep;
      for (std::size_t i = 1; i <= n; ++i) {
        ChaseVertex c;
        c.parent = st.vertex;
        c.trigger = *trig;
        c.disjunct = static_cast<uint32_t>(i);
        c.depth = depth;
        bool deep = false;
        for (auto& a : out(*trig, i)) {
          if (st.facts.contains(a)) continue;
          for (auto t : a.args) deep = deep || t.depth() > budget.max_term_depth;
          c.added.push_back(std::move(a));
        }
        kids.push_back(static_cast<uint32_t>(tree.vertices.size()));
        too_deep.push_back(deep);
        tree.vertices.push_back(std::move(c));
      }
      tree.vertices[st.vertex].children = kids;

      // children 2..n get their own copy of the branch state
      for (std::size_t i = n; i >= 2; --i) {
        uint32_t v = kids[i - 1];
        if (too_deep[i - 1]) {
          exhaust(v);
          continue;
        }
        detail::BranchState copy = st;
        copy.vertex = v;
        copy.facts.insert_all(tree.vertices[v].added);
        copy.discover(rules, tree.vertices[v].added);
        stack.push_back(std::move(copy));
      }
      uint32_t v = kids[0];
      if (too_deep[0]) {
        exhaust(v);
        break;
      }
      st.vertex = v;
      st.facts.insert_all(tree.vertices[v].added);
      st.discover(rules, tree.vertices[v].added);
    }
  }
  return tree;
}

// One label per leaf, duplicates removed.
inline std::vector<FactSet> results(const ChaseTree& tree) {
  if (tree.status != ChaseStatus::Complete) throw Error("incomplete-tree: results need a complete chase tree");
  std::vector<FactSet> out;
  for (auto v : tree.leaves()) {
    FactSet l = tree.label(v);
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(std::move(l));
  }
  return out;
}

enum class Entailment { Yes, No, Unknown };

inline const char* to_string(Entailment e) {
  switch (e) {
    case Entailment::Yes: return "yes";
    case Entailment::No: return "no";
    default: return "unknown";
  }
}

inline Entailment entails(const RuleSet& rules, const FactSet& database, const std::vector<Atom>& query,
                          const ChaseBudget& budget = {}) {
  ChaseTree tree = run_chase(rules, database, budget);
  if (tree.status != ChaseStatus::Complete) return Entailment::Unknown;
  for (const auto& r : results(tree))
    if (!has_match(query, Substitution{}, r)) return Entailment::No;
  return Entailment::Yes;
}

// Root path that follows, at every expansion, the child adding out_hc.
inline std::vector<uint32_t> hc_branch(const ChaseTree& tree, const HeadChoice& hc) {
  std::vector<uint32_t> path{tree.root()};
  uint32_t v = tree.root();
  while (!tree[v].children.empty()) {
    const auto& kids = tree[v].children;
    const Trigger& t = *tree[kids[0]].trigger;
    v = kids.size() == 1 ? kids[0] : kids.at(hc(*t.rule) - 1);
    path.push_back(v);
  }
  return path;
}

// Line-oriented trace: one line per vertex.
inline std::string export_trace(const ChaseTree& tree, const RuleSet* rules = nullptr) {
  Printer p(rules);
  std::ostringstream os;
  os << "status " << to_string(tree.status) << "\n";
  for (uint32_t v = 0; v < tree.size(); ++v) {
    const auto& x = tree[v];
    os << "v" << v << " parent=" << x.parent << " depth=" << x.depth;
    if (x.trigger) os << " trigger=" << p.trigger(*x.trigger) << " disjunct=" << x.disjunct;
    os << " new=" << p.atoms(x.added, ";");
    if (x.leaf) os << " leaf";
    if (x.aborted) os << " aborted";
    os << "\n";
  }
  return os.str();
}

inline std::string export_dot(const ChaseTree& tree, const RuleSet* rules = nullptr) {
  Printer p(rules);
  auto esc = [](std::string s) {
    std::string o;
    for (char c : s) {
      if (c == '"' || c == '\\') o += '\\';
      o += c;
    }
    return o;
  };
  std::ostringstream os;
  os << "digraph chase {\n  node [shape=box];\n";
  for (uint32_t v = 0; v < tree.size(); ++v) {
    const auto& x = tree[v];
    std::string label = "v" + std::to_string(v) + "\\n" + esc(p.atoms(x.added, "\\n"));
    os << "  v" << v << " [label=\"" << label << "\"" << (x.aborted ? ", style=dashed" : "") << "];\n";
  }
  for (uint32_t v = 0; v < tree.size(); ++v)
    for (auto c : tree[v].children)
      os << "  v" << v << " -> v" << c << " [label=\"" << esc(p.trigger(*tree[c].trigger)) << " #" << tree[c].disjunct
         << "\"];\n";
  os << "}\n";
  return os.str();
}

}  // namespace sentinel
