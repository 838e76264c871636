#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "terms.hpp"

namespace sentinel {

struct HeadDisjunct {
  std::vector<Term> existentials;
  std::vector<Atom> atoms;
};

struct SkolemizedRule {
  std::vector<Atom> body;
  std::vector<std::vector<Atom>> heads;
};

class Rule {
 public:
  Rule(std::string id, std::vector<Atom> body, std::vector<HeadDisjunct> heads)
      : id_(std::move(id)), body_(std::move(body)), heads_(std::move(heads)) {
    if (body_.empty()) throw Error("rule " + id_ + ": empty body");
    if (heads_.empty()) throw Error("rule " + id_ + ": no head disjunct");
    for (const auto& a : body_)
      for (auto t : a.args)
        if (!t.is_variable()) throw Error("rule " + id_ + ": body terms must be variables");
    collect_variables(body_, body_vars_);
    std::vector<Term> head_vars;
    for (const auto& h : heads_) {
      if (h.atoms.empty()) throw Error("rule " + id_ + ": empty head disjunct");
      for (const auto& a : h.atoms)
        for (auto t : a.args) {
          if (!t.is_variable()) throw Error("rule " + id_ + ": head terms must be variables");
          bool in_body = contains(body_vars_, t);
          bool existential = contains(h.existentials, t);
          if (in_body == existential)
            throw Error("rule " + id_ + ": variable " + t.name() + " must be frontier or existential");
          if (in_body && !contains(head_vars, t)) head_vars.push_back(t);
        }
      for (auto y : h.existentials)
        if (contains(body_vars_, y)) throw Error("rule " + id_ + ": existential " + y.name() + " occurs in body");
    }
    for (auto x : body_vars_)
      if (contains(head_vars, x)) frontier_.push_back(x);
    if (frontier_.empty() && generating())
      throw Error("rule " + id_ + ": existential variables need a non-empty frontier");

    for (std::size_t i = 0; i < heads_.size(); ++i) {
      Substitution sk;
      for (auto x : frontier_) sk.bind(x, x);
      for (auto y : heads_[i].existentials) {
        SkolemId f = skolem_symbol(id_, static_cast<uint32_t>(i + 1), y.symbol());
        skolems_.push_back(f);
        sk.bind(y, Term::functional(f, frontier_));
      }
      skolemized_.push_back(sk.apply(heads_[i].atoms));
    }
  }

  const std::string& id() const { return id_; }
  const std::vector<Atom>& body() const { return body_; }
  const std::vector<HeadDisjunct>& heads() const { return heads_; }
  // disjunct numbers are 1-based
  const HeadDisjunct& disjunct(std::size_t i) const { return heads_.at(i - 1); }
  const std::vector<Atom>& skolemized_head(std::size_t i) const { return skolemized_.at(i - 1); }
  const std::vector<Term>& body_variables() const { return body_vars_; }
  const std::vector<Term>& frontier() const { return frontier_; }
  const std::vector<SkolemId>& skolem_symbols() const { return skolems_; }
  bool owns(SkolemId f) const { return std::find(skolems_.begin(), skolems_.end(), f) != skolems_.end(); }

  std::size_t branching() const { return heads_.size(); }
  bool deterministic() const { return heads_.size() == 1; }
  bool generating() const {
    return std::any_of(heads_.begin(), heads_.end(), [](const HeadDisjunct& h) { return !h.existentials.empty(); });
  }
  bool datalog() const { return deterministic() && !generating(); }

  // position inside the owning RuleSet
  std::size_t index() const { return index_; }

 private:
  friend class RuleSet;
  static bool contains(const std::vector<Term>& v, Term t) { return std::find(v.begin(), v.end(), t) != v.end(); }

  std::string id_;
  std::vector<Atom> body_;
  std::vector<HeadDisjunct> heads_;
  std::vector<Term> body_vars_;
  std::vector<Term> frontier_;
  std::vector<SkolemId> skolems_;
  std::vector<std::vector<Atom>> skolemized_;
  std::size_t index_ = 0;
};

inline SkolemizedRule skolemize(const Rule& rule) {
  SkolemizedRule out{rule.body(), {}};
  for (std::size_t i = 1; i <= rule.branching(); ++i) out.heads.push_back(rule.skolemized_head(i));
  return out;
}

// Terms f(s) where f belongs to sk(rho) and some sk(rho) symbol occurs in s.
inline bool is_rho_cyclic(Term t, const Rule& rho) {
  if (!t.is_functional() || !rho.owns(t.function())) return false;
  for (std::size_t i = 0; i < t.arity(); ++i)
    for (auto f : rho.skolem_symbols())
      if (occurs_function(t.arg(i), f)) return true;
  return false;
}

// Rules keep stable addresses; copies of a RuleSet share nothing.
class RuleSet {
 public:
  RuleSet() = default;
  RuleSet(const RuleSet& other) {
    for (const auto& r : other.rules_) add(*r);
  }
  RuleSet& operator=(const RuleSet& other) {
    if (this != &other) {
      RuleSet tmp(other);
      *this = std::move(tmp);
    }
    return *this;
  }
  RuleSet(RuleSet&&) = default;
  RuleSet& operator=(RuleSet&&) = default;

  const Rule& add(Rule rule) {
    for (const auto& r : rules_)
      if (r->id() == rule.id()) throw Error("duplicate rule id " + rule.id());
    auto p = std::make_unique<Rule>(std::move(rule));
    p->index_ = rules_.size();
    for (std::size_t i = 1; i <= p->branching(); ++i)
      for (auto y : p->disjunct(i).existentials)
        origin_[skolem_symbol(p->id(), static_cast<uint32_t>(i), y.symbol())] = {p.get(), i};
    for (const auto& a : p->body()) note_predicate(a.pred);
    for (const auto& h : p->heads())
      for (const auto& a : h.atoms) note_predicate(a.pred);
    rules_.push_back(std::move(p));
    return *rules_.back();
  }

  // Keeps rule ids, so skolem symbols agree with the parent set.
  RuleSet subset(const std::vector<std::string>& ids) const {
    RuleSet out;
    for (const auto& id : ids) out.add(at(id));
    return out;
  }

  std::size_t size() const { return rules_.size(); }
  bool empty() const { return rules_.empty(); }
  const Rule& operator[](std::size_t i) const { return *rules_[i]; }
  const Rule& at(const std::string& id) const {
    for (const auto& r : rules_)
      if (r->id() == id) return *r;
    throw Error("no rule with id " + id);
  }
  const Rule* find(const std::string& id) const {
    for (const auto& r : rules_)
      if (r->id() == id) return r.get();
    return nullptr;
  }

  struct Origin {
    const Rule* rule = nullptr;
    std::size_t disjunct = 0;
  };
  // The rule and disjunct that introduce skolem symbol f.
  Origin origin(SkolemId f) const {
    auto it = origin_.find(f);
    if (it == origin_.end()) throw Error("symbol-not-in-ruleset: " + skolem_name(f));
    return it->second;
  }
  bool knows(SkolemId f) const { return origin_.count(f) > 0; }

  // predicates in order of first occurrence
  const std::vector<PredId>& predicates() const { return predicates_; }

  std::size_t branching() const {
    std::size_t b = 1;
    for (const auto& r : rules_) b = std::max(b, r->branching());
    return b;
  }

  struct Iterator {
    std::vector<std::unique_ptr<Rule>>::const_iterator it;
    const Rule& operator*() const { return **it; }
    const Rule* operator->() const { return it->get(); }
    Iterator& operator++() {
      ++it;
      return *this;
    }
    bool operator!=(const Iterator& o) const { return it != o.it; }
    bool operator==(const Iterator& o) const { return it == o.it; }
  };
  Iterator begin() const { return {rules_.begin()}; }
  Iterator end() const { return {rules_.end()}; }

  // Abbreviated skolem name f_y when y names a single skolem symbol of the set.
  std::string short_name(SkolemId f) const {
    const auto& info = skolem_info(f);
    int same = 0;
    for (auto& [g, o] : origin_)
      if (skolem_info(g).variable == info.variable) ++same;
    if (same == 1 && knows(f)) return "f_" + symbol_name(info.variable);
    return skolem_name(f);
  }

 private:
  void note_predicate(PredId p) {
    if (std::find(predicates_.begin(), predicates_.end(), p) == predicates_.end()) predicates_.push_back(p);
  }

  std::vector<std::unique_ptr<Rule>> rules_;
  std::map<SkolemId, Origin> origin_;
  std::vector<PredId> predicates_;
};

// A disjunct (1-based) for every rule of a rule set.
class HeadChoice {
 public:
  HeadChoice() = default;
  explicit HeadChoice(std::vector<uint32_t> choice) : choice_(std::move(choice)) {}

  // hc_i(rho) = min(i, branching(rho))
  static HeadChoice uniform(const RuleSet& rules, uint32_t i) {
    std::vector<uint32_t> c;
    for (const auto& r : rules) c.push_back(std::min<uint32_t>(i, static_cast<uint32_t>(r.branching())));
    return HeadChoice(std::move(c));
  }

  uint32_t operator()(const Rule& r) const {
    if (r.index() >= choice_.size()) throw Error("head choice not total on rule set");
    if (consulted_) (*consulted_)[r.index()] = 1;
    return choice_[r.index()];
  }

  const std::vector<uint32_t>& values() const { return choice_; }
  std::size_t size() const { return choice_.size(); }

  // Records which rules' choices are read; used to prune equivalent head choices.
  void record_into(std::vector<uint8_t>* consulted) const { consulted_ = consulted; }

  friend bool operator==(const HeadChoice& a, const HeadChoice& b) { return a.choice_ == b.choice_; }

 private:
  std::vector<uint32_t> choice_;
  mutable std::vector<uint8_t>* consulted_ = nullptr;
};

}  // namespace sentinel
