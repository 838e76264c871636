#pragma once

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "matcher.hpp"
#include "util.hpp"

namespace sentinel {

// mfa: plain skolem saturation. rmfa_like: a non-datalog trigger is skipped
// when the facts that must already hold for any chase trigger of its shape
// make it obsolete (datalog rules assumed to be applied first).
enum class AcyclicityMode { MFA, RmfaLike };

inline const char* to_string(AcyclicityMode m) { return m == AcyclicityMode::MFA ? "mfa" : "rmfa-like"; }

enum class AcyclicityResult { Terminating, NotDetected, ResourceExhausted };

inline const char* to_string(AcyclicityResult r) {
  switch (r) {
    case AcyclicityResult::Terminating: return "terminating";
    case AcyclicityResult::NotDetected: return "not-detected";
    default: return "resource-exhausted";
  }
}

struct AcyclicityBudget {
  std::size_t max_facts = 2000000;
  Deadline deadline;
};

struct AcyclicityVerdict {
  unsigned k = 2;
  AcyclicityMode mode = AcyclicityMode::RmfaLike;
  AcyclicityResult result = AcyclicityResult::Terminating;
  std::optional<Term> cyclic_term;
  std::size_t facts = 0;
  std::size_t triggers = 0;
  std::size_t blocked = 0;
  double wall_ms = 0;
  std::string note;
};

namespace detail {

inline Term generalize_stars(Term t, unsigned& next) {
  if (is_star(t)) return Term::constant("__gen_" + std::to_string(next++));
  if (!t.is_functional()) return t;
  std::vector<Term> args;
  for (std::size_t i = 0; i < t.arity(); ++i) args.push_back(generalize_stars(t.arg(i), next));
  return Term::functional(t.function(), args);
}

// out facts and frontier-only body atoms of the trigger that created t, recursively
inline void creation_facts(Term t, const RuleSet& rules, FactSet& out, TermSet& done) {
  if (!t.is_functional() || !done.insert(t).second) return;
  for (std::size_t i = 0; i < t.arity(); ++i) creation_facts(t.arg(i), rules, out, done);
  auto origin = rules.origin(t.function());
  const Rule& r = *origin.rule;
  Substitution s;
  for (std::size_t i = 0; i < r.frontier().size(); ++i) s.bind(r.frontier()[i], t.arg(i));
  out.insert_all(s.apply(r.skolemized_head(origin.disjunct)));
  for (const auto& a : r.body()) {
    bool frontier_only = true;
    for (auto v : a.args) frontier_only = frontier_only && s.get(v).has_value();
    if (frontier_only) out.insert(s.apply(a));
  }
}

inline void datalog_closure(const RuleSet& rules, FactSet& facts) {
  std::unordered_set<Trigger, TriggerHash> seen;
  for (std::size_t p = 0; p < facts.size(); ++p) {
    Atom f = facts[p];
    for (const auto& r : rules) {
      if (!r.datalog()) continue;
      std::vector<Trigger> found;
      triggers_using(r, f, facts, [&](Trigger t) {
        if (seen.insert(t).second) found.push_back(std::move(t));
        return true;
      });
      for (const auto& t : found) facts.insert_all(out(t, 1));
    }
  }
}

inline bool guaranteed_blocked(const RuleSet& rules, const Trigger& t) {
  unsigned next = 0;
  Substitution g;
  for (auto& [v, val] : t.sigma) g.bind(v, generalize_stars(val, next));
  Trigger generic(*t.rule, g);
  FactSet G;
  G.insert_all(body_instance(generic));
  TermSet done;
  for (auto& [v, val] : g) creation_facts(val, rules, G, done);
  datalog_closure(rules, G);
  return is_obsolete(generic, G);
}

}  // namespace detail

inline FactSet critical_instance(const RuleSet& rules) {
  FactSet out;
  for (auto p : rules.predicates()) out.insert(Atom(p, std::vector<Term>(predicate_arity(p), star())));
  return out;
}

// Saturates the critical instance with every disjunct applied; any k-cyclic
// term ends the run with not-detected.
inline AcyclicityVerdict check_acyclic(const RuleSet& rules, unsigned k = 2,
                                       AcyclicityMode mode = AcyclicityMode::RmfaLike,
                                       const AcyclicityBudget& budget = {}) {
  if (k == 0) throw Error("k must be positive");
  Stopwatch watch;
  AcyclicityVerdict v;
  v.k = k;
  v.mode = mode;
  FactSet F = critical_instance(rules);
  std::unordered_set<Trigger, TriggerHash> seen;
  std::vector<Trigger> found;
  for (std::size_t p = 0; p < F.size(); ++p) {
    if (F.size() > budget.max_facts || budget.deadline.expired()) {
      v.result = AcyclicityResult::ResourceExhausted;
      v.note = F.size() > budget.max_facts ? "fact budget" : "time";
      break;
    }
    Atom fact = F[p];
    found.clear();
    for (const auto& r : rules)
      triggers_using(r, fact, F, [&](Trigger t) {
        if (seen.insert(t).second) found.push_back(std::move(t));
        return true;
      });
    for (const auto& t : found) {
      if (mode == AcyclicityMode::RmfaLike && !t.rule->datalog() && detail::guaranteed_blocked(rules, t)) {
        v.blocked++;
        continue;
      }
      v.triggers++;
      for (const auto& a : out_all(t)) {
        for (auto x : a.args)
          if (is_k_cyclic(x, k)) {
            v.result = AcyclicityResult::NotDetected;
            v.cyclic_term = x;
            break;
          }
        if (v.cyclic_term) break;
        F.insert(a);
      }
      if (v.cyclic_term) break;
    }
    if (v.cyclic_term) break;
  }
  v.facts = F.size();
  v.wall_ms = watch.ms();
  return v;
}

}  // namespace sentinel
