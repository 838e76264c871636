#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "rules.hpp"

namespace sentinel {

// Set of ground atoms, iterated in insertion order, indexed by predicate
// and by (predicate, first argument).
class FactSet {
 public:
  FactSet() = default;
  FactSet(std::initializer_list<Atom> atoms) {
    for (const auto& a : atoms) insert(a);
  }
  template <class It>
  FactSet(It first, It last) {
    for (; first != last; ++first) insert(*first);
  }

  bool insert(const Atom& a) {
    if (index_.count(a)) return false;
    uint32_t pos = static_cast<uint32_t>(facts_.size());
    facts_.push_back(a);
    index_.emplace(a, pos);
    by_pred_[a.pred].push_back(pos);
    if (!a.args.empty()) by_first_[first_key(a.pred, a.args[0])].push_back(pos);
    return true;
  }

  template <class Range>
  std::size_t insert_all(const Range& atoms) {
    std::size_t n = 0;
    for (const auto& a : atoms) n += insert(a);
    return n;
  }

  bool contains(const Atom& a) const { return index_.count(a) > 0; }
  bool contains_all(const std::vector<Atom>& atoms) const {
    for (const auto& a : atoms)
      if (!contains(a)) return false;
    return true;
  }

  // insertion position of a fact, or -1
  long position(const Atom& a) const {
    auto it = index_.find(a);
    return it == index_.end() ? -1 : static_cast<long>(it->second);
  }

  std::size_t size() const { return facts_.size(); }
  bool empty() const { return facts_.empty(); }
  const Atom& operator[](std::size_t i) const { return facts_[i]; }
  auto begin() const { return facts_.begin(); }
  auto end() const { return facts_.end(); }
  const std::vector<Atom>& atoms() const { return facts_; }

  const std::vector<uint32_t>& with_predicate(PredId p) const {
    auto it = by_pred_.find(p);
    return it == by_pred_.end() ? empty_ : it->second;
  }
  const std::vector<uint32_t>& with_first(PredId p, Term first) const {
    auto it = by_first_.find(first_key(p, first));
    return it == by_first_.end() ? empty_ : it->second;
  }

  // every term occurring as an argument (not subterms), in first-occurrence order
  std::vector<Term> terms() const {
    std::vector<Term> out;
    TermSet seen;
    for (const auto& a : facts_)
      for (auto t : a.args)
        if (seen.insert(t).second) out.push_back(t);
    return out;
  }

  friend bool operator==(const FactSet& a, const FactSet& b) {
    if (a.size() != b.size()) return false;
    for (const auto& f : a.facts_)
      if (!b.contains(f)) return false;
    return true;
  }

 private:
  static uint64_t first_key(PredId p, Term t) { return (static_cast<uint64_t>(p) << 32) | t.id(); }

  std::vector<Atom> facts_;
  std::unordered_map<Atom, uint32_t, AtomHash> index_;
  std::unordered_map<PredId, std::vector<uint32_t>> by_pred_;
  std::unordered_map<uint64_t, std::vector<uint32_t>> by_first_;
  static inline const std::vector<uint32_t> empty_{};
};

// ---------------------------------------------------------------------------
// Triggers

struct Trigger {
  const Rule* rule = nullptr;
  Substitution sigma;

  Trigger() = default;
  Trigger(const Rule& r, Substitution s) : rule(&r), sigma(std::move(s)) {}

  friend bool operator==(const Trigger& a, const Trigger& b) { return a.rule == b.rule && a.sigma == b.sigma; }
};

struct TriggerHash {
  std::size_t operator()(const Trigger& t) const {
    std::size_t h = std::hash<const void*>{}(t.rule);
    hash_mix(h, t.sigma.hash());
    return h;
  }
};

inline std::vector<Atom> instantiate(const std::vector<Atom>& atoms, const Substitution& s) { return s.apply(atoms); }

// out_i(λ) for 1-based disjunct i, duplicates removed
inline std::vector<Atom> out(const Trigger& t, std::size_t disjunct) {
  std::vector<Atom> res;
  for (const auto& a : t.rule->skolemized_head(disjunct)) {
    Atom g = t.sigma.apply(a);
    if (std::find(res.begin(), res.end(), g) == res.end()) res.push_back(std::move(g));
  }
  return res;
}

inline std::vector<Atom> out_hc(const Trigger& t, const HeadChoice& hc) { return out(t, hc(*t.rule)); }

// ⋃ out_i(λ) over all disjuncts
inline std::vector<Atom> out_all(const Trigger& t) {
  std::vector<Atom> res;
  for (std::size_t i = 1; i <= t.rule->branching(); ++i)
    for (auto& a : out(t, i))
      if (std::find(res.begin(), res.end(), a) == res.end()) res.push_back(std::move(a));
  return res;
}

inline bool same_atom_set(std::vector<Atom> a, std::vector<Atom> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return a == b;
}

inline std::vector<Atom> body_instance(const Trigger& t) { return t.sigma.apply(t.rule->body()); }

// ---------------------------------------------------------------------------
// Birth facts and skeletons

inline void birth_facts_into(Term t, const RuleSet& rules, FactSet& out) {
  if (!t.is_functional()) return;
  auto origin = rules.origin(t.function());
  const Rule& rho = *origin.rule;
  Substitution s;
  const auto& frontier = rho.frontier();
  if (frontier.size() != t.arity()) throw Error("skolem term arity does not match frontier");
  for (std::size_t i = 0; i < frontier.size(); ++i) s.bind(frontier[i], t.arg(i));
  out.insert_all(s.apply(rho.skolemized_head(origin.disjunct)));
  for (std::size_t i = 0; i < t.arity(); ++i) birth_facts_into(t.arg(i), rules, out);
}

inline FactSet birth_facts(Term t, const RuleSet& rules) {
  FactSet out;
  birth_facts_into(t, rules, out);
  return out;
}

inline FactSet birth_facts(const Trigger& trigger, const RuleSet& rules) {
  FactSet out;
  for (auto x : trigger.rule->frontier())
    if (auto t = trigger.sigma.get(x)) birth_facts_into(*t, rules, out);
  return out;
}

// Terms of Birth(λ) plus constants assigned to frontier variables, closed under subterms.
inline TermSet skeleton(const Trigger& trigger, const RuleSet& rules) {
  TermSet out;
  for (const auto& a : birth_facts(trigger, rules))
    for (auto t : a.args) collect_subterms(t, out);
  for (auto x : trigger.rule->frontier())
    if (auto t = trigger.sigma.get(x)) {
      if (t->is_constant()) out.insert(*t);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Readable rendering (c_X, c_V, *, f_V abbreviations)

class Printer {
 public:
  explicit Printer(const RuleSet* rules = nullptr) : rules_(rules) {}

  std::string fn(SkolemId f) const { return rules_ ? rules_->short_name(f) : skolem_name(f); }

  std::string term(Term t) const {
    if (t.is_functional()) {
      std::string s = fn(t.function()) + "(";
      for (std::size_t i = 0; i < t.arity(); ++i) {
        if (i) s += ",";
        s += term(t.arg(i));
      }
      return s + ")";
    }
    const std::string& n = t.name();
    if (t.is_constant()) {
      if (n == kStarName) return "*";
      if (n.rfind(kDbPrefix, 0) == 0) return "c_" + n.substr(kDbPrefix.size());
      if (n.rfind(kUcPrefix, 0) == 0) {
        std::string f = n.substr(kUcPrefix.size());
        if (rules_) {
          for (const auto& r : *rules_)
            for (auto g : r.skolem_symbols())
              if (skolem_name(g) == f) {
                std::string sn = rules_->short_name(g);
                return "c_" + (sn.rfind("f_", 0) == 0 ? sn.substr(2) : sn);
              }
        }
        return "c_" + f;
      }
    }
    return n;
  }

  std::string atom(const Atom& a) const {
    std::string s = predicate_name(a.pred) + "(";
    for (std::size_t i = 0; i < a.args.size(); ++i) {
      if (i) s += ",";
      s += term(a.args[i]);
    }
    return s + ")";
  }

  std::string atoms(const std::vector<Atom>& as, const char* sep = ", ") const {
    std::string s;
    for (std::size_t i = 0; i < as.size(); ++i) {
      if (i) s += sep;
      s += atom(as[i]);
    }
    return s;
  }

  std::string facts(const FactSet& f) const {
    std::vector<std::string> parts;
    for (const auto& a : f) parts.push_back(atom(a));
    std::sort(parts.begin(), parts.end());
    std::string s = "{";
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) s += ", ";
      s += parts[i];
    }
    return s + "}";
  }

  std::string substitution(const Substitution& s, const std::vector<Term>& order) const {
    std::string out = "[";
    bool first = true;
    for (auto v : order)
      if (auto t = s.get(v)) {
        if (!first) out += ", ";
        first = false;
        out += v.name() + "/" + term(*t);
      }
    return out + "]";
  }

  std::string trigger(const Trigger& t) const {
    return "<(" + t.rule->id() + "), " + substitution(t.sigma, t.rule->body_variables()) + ">";
  }

  std::string mapping(const ConstantMapping& g) const {
    std::vector<std::string> parts;
    for (auto& [c, v] : g) parts.push_back(term(c) + " -> " + term(v));
    std::sort(parts.begin(), parts.end());
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) s += ", ";
      s += parts[i];
    }
    return s;
  }

 private:
  const RuleSet* rules_;
};

}  // namespace sentinel
