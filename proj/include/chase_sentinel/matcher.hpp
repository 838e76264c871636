#pragma once

#include <vector>

#include "model.hpp"

namespace sentinel {

namespace detail {

class ConjunctionMatcher {
 public:
  ConjunctionMatcher(const std::vector<Atom>& pattern, const Substitution& base, const FactSet& facts)
      : pattern_(pattern), base_(base), facts_(facts) {
    args_.resize(pattern.size());
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      for (auto t : pattern[i].args) {
        ArgRef ref;
        if (t.is_variable()) {
          if (auto v = base.get(t)) {
            ref.fixed = *v;
          } else {
            auto it = std::find(vars_.begin(), vars_.end(), t);
            ref.slot = static_cast<int>(it - vars_.begin());
            if (it == vars_.end()) vars_.push_back(t);
          }
        } else {
          ref.fixed = t;
        }
        args_[i].push_back(ref);
      }
    }
    binding_.assign(vars_.size(), Term());
    used_.assign(pattern.size(), false);
  }

  template <class F>
  bool run(F& cb) {
    return step(pattern_.size(), cb);
  }

 private:
  struct ArgRef {
    int slot = -1;
    Term fixed;
  };

  Term resolve(const ArgRef& r) const { return r.slot < 0 ? r.fixed : binding_[r.slot]; }

  template <class F>
  bool step(std::size_t remaining, F& cb) {
    if (remaining == 0) {
      Substitution s = base_;
      for (std::size_t i = 0; i < vars_.size(); ++i) s.bind(vars_[i], binding_[i]);
      return cb(static_cast<const Substitution&>(s));
    }
    // most selective remaining atom, ties broken by source order
    std::size_t best = pattern_.size();
    const std::vector<uint32_t>* best_cands = nullptr;
    for (std::size_t i = 0; i < pattern_.size(); ++i) {
      if (used_[i]) continue;
      const std::vector<uint32_t>* cands;
      Term first = args_[i].empty() ? Term() : resolve(args_[i][0]);
      if (first.valid())
        cands = &facts_.with_first(pattern_[i].pred, first);
      else
        cands = &facts_.with_predicate(pattern_[i].pred);
      if (!best_cands || cands->size() < best_cands->size()) {
        best = i;
        best_cands = cands;
      }
    }
    if (best_cands->empty()) return true;
    used_[best] = true;
    const auto& refs = args_[best];
    std::vector<int> newly;
    // candidates are copied by index; the fact set is not modified during matching
    for (std::size_t k = 0; k < best_cands->size(); ++k) {
      const Atom& fact = facts_[(*best_cands)[k]];
      newly.clear();
      bool ok = true;
      for (std::size_t j = 0; j < refs.size() && ok; ++j) {
        Term cur = resolve(refs[j]);
        if (cur.valid()) {
          ok = cur == fact.args[j];
        } else {
          binding_[refs[j].slot] = fact.args[j];
          newly.push_back(refs[j].slot);
        }
      }
      bool cont = true;
      if (ok) cont = step(remaining - 1, cb);
      for (int s : newly) binding_[s] = Term();
      if (!cont) {
        used_[best] = false;
        return false;
      }
    }
    used_[best] = false;
    return true;
  }

  const std::vector<Atom>& pattern_;
  const Substitution& base_;
  const FactSet& facts_;
  std::vector<std::vector<ArgRef>> args_;
  std::vector<Term> vars_;
  std::vector<Term> binding_;
  std::vector<bool> used_;
};

}  // namespace detail

// Calls cb(τ) for every extension τ of base with pattern·τ ⊆ facts.
// cb returns false to stop; the function returns false if stopped early.
template <class F>
bool match_conjunction(const std::vector<Atom>& pattern, const Substitution& base, const FactSet& facts, F&& cb) {
  detail::ConjunctionMatcher m(pattern, base, facts);
  return m.run(cb);
}

inline std::vector<Substitution> all_matches(const std::vector<Atom>& pattern, const Substitution& base,
                                             const FactSet& facts) {
  std::vector<Substitution> out;
  match_conjunction(pattern, base, facts, [&](const Substitution& s) {
    out.push_back(s);
    return true;
  });
  return out;
}

inline bool has_match(const std::vector<Atom>& pattern, const Substitution& base, const FactSet& facts) {
  return !match_conjunction(pattern, base, facts, [](const Substitution&) { return false; });
}

inline bool is_loaded(const Trigger& t, const FactSet& facts) {
  for (const auto& a : t.rule->body())
    if (!facts.contains(t.sigma.apply(a))) return false;
  return true;
}

inline bool is_obsolete(const Trigger& t, const FactSet& facts) {
  for (const auto& h : t.rule->heads())
    if (has_match(h.atoms, t.sigma, facts)) return true;
  return false;
}

inline bool satisfies(const FactSet& facts, const Rule& rule) {
  return match_conjunction(rule.body(), Substitution{}, facts, [&](const Substitution& s) {
    return is_obsolete(Trigger(rule, s), facts);
  });
}

inline bool satisfies(const FactSet& facts, const RuleSet& rules) {
  for (const auto& r : rules)
    if (!satisfies(facts, r)) return false;
  return true;
}

// Loaded triggers of `rule` whose body uses `fact` for at least one atom.
template <class F>
void triggers_using(const Rule& rule, const Atom& fact, const FactSet& facts, F&& cb) {
  const auto& body = rule.body();
  for (std::size_t j = 0; j < body.size(); ++j) {
    if (body[j].pred != fact.pred) continue;
    Substitution base;
    bool ok = true;
    for (std::size_t k = 0; k < fact.args.size() && ok; ++k) {
      Term v = body[j].args[k];
      if (auto b = base.get(v))
        ok = *b == fact.args[k];
      else
        base.bind(v, fact.args[k]);
    }
    if (!ok) continue;
    std::vector<Atom> rest;
    for (std::size_t k = 0; k < body.size(); ++k)
      if (k != j) rest.push_back(body[k]);
    bool go = match_conjunction(rest, base, facts, [&](const Substitution& s) { return cb(Trigger(rule, s)); });
    if (!go) return;
  }
}

inline std::vector<Trigger> loaded_triggers(const RuleSet& rules, const FactSet& facts) {
  std::vector<Trigger> out;
  for (const auto& r : rules)
    for (auto& s : all_matches(r.body(), Substitution{}, facts)) out.emplace_back(r, std::move(s));
  return out;
}

}  // namespace sentinel
