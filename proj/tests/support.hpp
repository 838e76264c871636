#pragma once

// Random rule sets and brute-force oracles shared by the unit tests and the
// acceptance binary. Oracles only use the term/atom value types; they
// re-derive matching, outputs, birth facts and fixpoints naively.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "chase_sentinel.hpp"

// readable failure output in gtest
namespace sentinel {
inline void PrintTo(const Atom& a, std::ostream* os) { *os << to_string(a); }
inline void PrintTo(Term t, std::ostream* os) { *os << to_string(t); }
}  // namespace sentinel

namespace oracle {

using namespace sentinel;

inline std::string read_corpus(const std::string& name) { return read_file(std::string(CORPUS_DIR) + "/" + name); }

inline std::set<Atom> as_set(const FactSet& f) { return {f.begin(), f.end()}; }
inline std::set<Atom> as_set(const std::vector<Atom>& f) { return {f.begin(), f.end()}; }

inline std::vector<Term> terms_of(const std::set<Atom>& facts) {
  std::set<Term> s;
  for (const auto& a : facts)
    for (auto t : a.args) s.insert(t);
  return {s.begin(), s.end()};
}

inline std::vector<Term> vars_of(const std::vector<Atom>& atoms) {
  std::vector<Term> out;
  for (const auto& a : atoms)
    for (auto t : a.args)
      if (t.is_variable() && std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  return out;
}

inline Term subst(Term t, const std::map<Term, Term>& s) {
  if (t.is_variable()) {
    auto it = s.find(t);
    return it == s.end() ? t : it->second;
  }
  return t;
}

inline Atom subst(const Atom& a, const std::map<Term, Term>& s) {
  std::vector<Term> args;
  for (auto t : a.args) args.push_back(subst(t, s));
  return Atom(a.pred, args);
}

// every extension of `base` mapping `vars` into `domain` (odometer)
inline void each_assignment(const std::vector<Term>& vars, const std::vector<Term>& domain,
                            std::map<Term, Term> base, const std::function<void(const std::map<Term, Term>&)>& f) {
  std::vector<Term> free;
  for (auto v : vars)
    if (!base.count(v)) free.push_back(v);
  if (free.empty()) {
    f(base);
    return;
  }
  if (domain.empty()) return;
  std::vector<std::size_t> idx(free.size(), 0);
  for (;;) {
    for (std::size_t i = 0; i < free.size(); ++i) base[free[i]] = domain[idx[i]];
    f(base);
    std::size_t k = 0;
    while (k < free.size() && ++idx[k] == domain.size()) idx[k++] = 0;
    if (k == free.size()) return;
  }
}

inline bool all_in(const std::vector<Atom>& atoms, const std::map<Term, Term>& s, const std::set<Atom>& facts) {
  for (const auto& a : atoms)
    if (!facts.count(subst(a, s))) return false;
  return true;
}

// all matches of a conjunction, by trying every assignment
inline std::vector<std::map<Term, Term>> matches(const std::vector<Atom>& atoms, const std::set<Atom>& facts) {
  std::vector<std::map<Term, Term>> out;
  each_assignment(vars_of(atoms), terms_of(facts), {}, [&](const std::map<Term, Term>& s) {
    if (all_in(atoms, s, facts)) out.push_back(s);
  });
  return out;
}

inline std::map<Term, Term> to_map(const Substitution& s) {
  std::map<Term, Term> m;
  for (auto& [k, v] : s) m[k] = v;
  return m;
}

inline Substitution to_subst(const std::map<Term, Term>& m) {
  Substitution s;
  for (auto& [k, v] : m) s.bind(k, v);
  return s;
}

// obsolete iff some disjunct has an extension of sigma into the fact set
inline bool obsolete(const Trigger& t, const std::set<Atom>& facts) {
  auto base = to_map(t.sigma);
  for (const auto& h : t.rule->heads()) {
    bool hit = false;
    each_assignment(vars_of(h.atoms), terms_of(facts), base, [&](const std::map<Term, Term>& s) {
      if (!hit && all_in(h.atoms, s, facts)) hit = true;
    });
    if (hit) return true;
  }
  return false;
}

// frontier in body order, recomputed from the rule text
inline std::vector<Term> frontier(const Rule& r) {
  std::vector<Term> head_vars;
  for (const auto& h : r.heads())
    for (auto v : vars_of(h.atoms)) head_vars.push_back(v);
  std::vector<Term> out;
  for (auto v : vars_of(r.body()))
    if (std::find(head_vars.begin(), head_vars.end(), v) != head_vars.end()) out.push_back(v);
  return out;
}

inline std::vector<Atom> output(const Rule& r, const std::map<Term, Term>& sigma, uint32_t disjunct) {
  const auto& h = r.heads()[disjunct - 1];
  std::vector<Term> fr;
  for (auto x : frontier(r)) fr.push_back(sigma.at(x));
  std::map<Term, Term> s = sigma;
  for (auto y : vars_of(h.atoms))
    if (!s.count(y)) s[y] = Term::functional(skolem_symbol(r.id(), disjunct, intern(y.name())), fr);
  std::vector<Atom> out;
  for (const auto& a : h.atoms) out.push_back(subst(a, s));
  return out;
}

inline void birth(Term t, const RuleSet& rules, std::set<Atom>& out) {
  if (!t.is_functional()) return;
  const auto& info = skolem_info(t.function());
  const Rule& r = *rules.find(info.rule_id);
  auto fr = frontier(r);
  std::map<Term, Term> s;
  for (std::size_t i = 0; i < fr.size(); ++i) s[fr[i]] = t.arg(i);
  for (const auto& a : output(r, s, info.disjunct)) out.insert(a);
  for (std::size_t i = 0; i < t.arity(); ++i) birth(t.arg(i), rules, out);
}

inline void subterms(Term t, std::set<Term>& out) {
  out.insert(t);
  if (t.is_functional())
    for (std::size_t i = 0; i < t.arity(); ++i) subterms(t.arg(i), out);
}

inline std::set<Term> skeleton(const Trigger& t, const RuleSet& rules) {
  std::set<Atom> b;
  std::set<Term> out;
  for (auto x : frontier(*t.rule)) {
    Term v = *t.sigma.get(x);
    birth(v, rules, b);
    if (v.is_constant()) out.insert(v);
  }
  for (const auto& a : b)
    for (auto u : a.args) subterms(u, out);
  return out;
}

inline Term abstract_term(Term t, const std::set<Term>& skel, bool uc) {
  if (skel.count(t)) return t;
  if (uc && t.is_functional()) return uc_constant(t.function());
  if (uc && is_uc_constant(t)) return t;
  return star();
}

// Naive over-approximation: recompute every trigger of every rule over the
// whole set until nothing changes.
inline std::set<Atom> over_approx(const RuleSet& rules, const Trigger& pivot, bool uc, const HeadChoice* hc) {
  auto skel = oracle::skeleton(pivot, rules);
  std::vector<Term> consts;
  for (auto t : skel)
    if (t.is_constant()) consts.push_back(t);
  if (std::find(consts.begin(), consts.end(), star()) == consts.end()) consts.push_back(star());
  std::set<Atom> F;
  for (auto p : rules.predicates()) {
    std::vector<Term> vars;
    for (uint32_t i = 0; i < predicate_arity(p); ++i) vars.push_back(Term::variable("V" + std::to_string(i)));
    each_assignment(vars, consts, {}, [&](const std::map<Term, Term>& s) {
      std::vector<Term> args;
      for (auto v : vars) args.push_back(s.at(v));
      F.insert(Atom(p, args));
    });
  }
  for (auto x : frontier(*pivot.rule)) birth(*pivot.sigma.get(x), rules, F);

  auto piv = to_map(pivot.sigma);
  auto same = [](const std::vector<Atom>& a, const std::vector<Atom>& b) { return as_set(a) == as_set(b); };
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& r : rules)
      for (const auto& s : matches(r.body(), F)) {
        std::vector<std::vector<Atom>> outs;
        if (hc) {
          auto o = output(r, s, (*hc)(r));
          if (same(o, output(*pivot.rule, piv, (*hc)(*pivot.rule)))) continue;
          outs.push_back(o);
        } else {
          bool all_same = &r == pivot.rule;
          for (uint32_t i = 1; i <= r.branching() && all_same; ++i) all_same = same(output(r, s, i), output(r, piv, i));
          if (all_same) continue;
          for (uint32_t i = 1; i <= r.branching(); ++i) outs.push_back(output(r, s, i));
        }
        for (const auto& o : outs)
          for (const auto& a : o) {
            std::vector<Term> args;
            for (auto u : a.args) args.push_back(abstract_term(u, skel, uc));
            changed = F.insert(Atom(a.pred, args)).second || changed;
          }
      }
  }
  return F;
}

inline bool cyclic(Term t, std::vector<SkolemId>& path) {
  if (!t.is_functional()) return false;
  if (std::find(path.begin(), path.end(), t.function()) != path.end()) return true;
  path.push_back(t.function());
  bool c = false;
  for (std::size_t i = 0; i < t.arity() && !c; ++i) c = cyclic(t.arg(i), path);
  path.pop_back();
  return c;
}
inline bool cyclic(Term t) {
  std::vector<SkolemId> p;
  return cyclic(t, p);
}

// largest number of occurrences of one function symbol on a root-to-leaf path
inline unsigned max_repeat(Term t, std::map<SkolemId, unsigned>& count) {
  if (!t.is_functional()) {
    unsigned m = 0;
    for (auto& [f, c] : count) m = std::max(m, c);
    return m;
  }
  count[t.function()]++;
  unsigned m = 0;
  for (std::size_t i = 0; i < t.arity(); ++i) m = std::max(m, max_repeat(t.arg(i), count));
  count[t.function()]--;
  return m;
}
inline unsigned max_repeat(Term t) {
  std::map<SkolemId, unsigned> c;
  return max_repeat(t, c);
}

inline unsigned depth(Term t) {
  unsigned d = 0;
  if (t.is_functional())
    for (std::size_t i = 0; i < t.arity(); ++i) d = std::max(d, depth(t.arg(i)));
  return d + 1;
}

// Naive prefix fact set with every unblockability check taken as passed.
inline std::set<Atom> rpc_facts(const RuleSet& rules, const HeadChoice& hc, const Rule& rho, unsigned depth_cap) {
  std::map<Term, Term> uc;
  for (auto x : vars_of(rho.body())) uc[x] = db_constant(x);
  std::set<Atom> F;
  for (const auto& a : rho.body()) F.insert(subst(a, uc));
  for (const auto& a : output(rho, uc, hc(rho))) F.insert(a);
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& r : rules)
      for (const auto& s : matches(r.body(), F)) {
        bool bad = false;
        std::set<Term> range;
        for (auto& [v, t] : s) {
          bad = bad || cyclic(t);
          range.insert(t);
        }
        if (bad) continue;
        if (&r == &rho && range.size() != s.size()) continue;
        auto o = output(r, s, hc(r));
        bool deep = false;
        for (const auto& a : o)
          for (auto t : a.args) deep = deep || depth(t) > depth_cap;
        if (deep) continue;
        for (const auto& a : o) changed = F.insert(a).second || changed;
      }
  }
  return F;
}

// ---------------------------------------------------------------------------
// Random rule sets: <= 4 rules, predicates of arity <= 3, branching <= 2.

struct Generator {
  std::mt19937 rng;
  explicit Generator(unsigned seed) : rng(seed) {}

  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

  std::string atom(const std::vector<std::string>& preds, const std::vector<int>& arity,
                   const std::vector<std::string>& vars) {
    int p = pick(0, static_cast<int>(preds.size()) - 1);
    std::string s = preds[p] + "(";
    for (int i = 0; i < arity[p]; ++i) {
      if (i) s += ",";
      s += vars[pick(0, static_cast<int>(vars.size()) - 1)];
    }
    return s + ")";
  }

  std::string rule_text(const std::vector<std::string>& preds, const std::vector<int>& arity) {
    std::vector<std::string> bv = {"X", "Y", "Z"};
    bv.resize(pick(1, 3));
    std::string body;
    int nb = pick(1, 2);
    for (int i = 0; i < nb; ++i) body += (i ? ", " : "") + atom(preds, arity, bv);
    std::string s = body + " -> ";
    int nd = pick(1, 4) == 1 ? 2 : 1;
    for (int d = 0; d < nd; ++d) {
      std::vector<std::string> hv = bv;
      int ne = pick(0, 2);
      if (ne >= 1) hv.push_back("U");
      if (ne >= 2) hv.push_back("W");
      int nh = pick(1, 2);
      if (d) s += " | ";
      for (int i = 0; i < nh; ++i) s += (i ? ", " : "") + atom(preds, arity, hv);
    }
    return s + ".";
  }

  // retries until the text parses into a valid rule set
  SourceProgram rule_set() {
    for (;;) {
      int np = pick(1, 3);
      std::vector<std::string> preds;
      std::vector<int> arity;
      for (int i = 0; i < np; ++i) {
        preds.push_back(std::string(1, static_cast<char>('A' + i)) + "p");
        arity.push_back(pick(1, 3));
      }
      std::string text;
      int nr = pick(1, 4);
      for (int i = 0; i < nr; ++i) text += rule_text(preds, arity) + "\n";
      try {
        return parse(text);
      } catch (const Error&) {
      }
    }
  }
};

// constants plus random skolem terms of depth <= 3 over the rule set's symbols
inline std::vector<Term> term_pool(const RuleSet& rules, std::mt19937& rng, std::size_t n) {
  std::vector<Term> pool = {db_constant(Term::variable("X")), db_constant(Term::variable("Y")), Term::constant("d")};
  std::vector<SkolemId> fs;
  for (const auto& r : rules)
    for (auto f : r.skolem_symbols()) fs.push_back(f);
  for (int tries = 0; pool.size() < n && !fs.empty() && tries < 200; ++tries) {
    SkolemId f = fs[rng() % fs.size()];
    std::vector<Term> args;
    for (std::size_t i = 0; i < rules.origin(f).rule->frontier().size(); ++i) args.push_back(pool[rng() % pool.size()]);
    Term t = Term::functional(f, args);
    if (t.depth() <= 3 && std::find(pool.begin(), pool.end(), t) == pool.end()) pool.push_back(t);
  }
  return pool;
}

// a trigger for a random non-datalog rule with a random substitution
inline std::optional<Trigger> random_trigger(const RuleSet& rules, std::mt19937& rng) {
  std::vector<const Rule*> cand;
  for (const auto& r : rules)
    if (!r.datalog()) cand.push_back(&r);
  if (cand.empty()) return std::nullopt;
  const Rule& r = *cand[rng() % cand.size()];
  auto pool = term_pool(rules, rng, 3 + rng() % 5);
  Substitution s;
  for (auto x : r.body_variables()) s.bind(x, pool[rng() % pool.size()]);
  return Trigger(r, s);
}

// every head choice of a rule set
inline std::vector<HeadChoice> all_head_choices(const RuleSet& rules) {
  std::vector<HeadChoice> out;
  std::vector<uint32_t> cur(rules.size(), 1);
  for (;;) {
    out.emplace_back(cur);
    std::size_t k = 0;
    while (k < cur.size() && ++cur[k] > rules[k].branching()) cur[k++] = 1;
    if (k == cur.size()) return out;
  }
}

// ---------------------------------------------------------------------------
// Implication properties over random rule sets

struct PropertyStats {
  int cases = 0;
  int star_checked = 0, star_fail = 0;    // star-unblockable implies uc-unblockable for every hc
  int drpc_cyclic = 0, drpc_fail = 0;     // DRPC-cyclic implies RPC_s-cyclic
  int rpcs_cyclic = 0, disjoint_fail = 0; // never acyclic and RPC_s-cyclic together
  int prefixes = 0, prefix_fail = 0;      // prefixes replay, unroll, and grow
  std::vector<std::string> failures;
  double ms = 0;

  bool ok() const { return star_fail + drpc_fail + disjoint_fail + prefix_fail == 0; }
};

inline unsigned max_depth(const std::vector<Atom>& atoms) {
  unsigned d = 0;
  for (const auto& a : atoms)
    for (auto t : a.args) d = std::max(d, depth(t));
  return d;
}

// replays a prefix from its rule database, then its 3-fold unrolling; every
// trigger must be loaded and not obsolete, and each repetition must reach
// deeper terms than the one before
inline std::string check_prefix(const CyclicityPrefix& p) {
  FactSet F = p.database;
  for (const auto& t : p.triggers) {
    if (!is_loaded(t, F)) return "prefix trigger not loaded";
    F.insert_all(p.output(t));
  }
  auto seq = unroll_prefix(p, 3);
  std::size_t n = p.triggers.size() - 1;
  if (seq.size() != 1 + 3 * n) return "unrolled length";
  F = p.database;
  std::vector<unsigned> block(4, 0);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (!is_loaded(seq[i], F)) return "unrolled trigger " + std::to_string(i) + " not loaded";
    if (i > 0 && is_obsolete(seq[i], F)) return "unrolled trigger " + std::to_string(i) + " obsolete";
    auto o = p.output(seq[i]);
    F.insert_all(o);
    std::size_t b = i == 0 ? 0 : (i - 1) / n + 1;
    block[b] = std::max(block[b], max_depth(o));
  }
  for (int j = 2; j <= 3; ++j)
    if (block[j] <= block[j - 1]) return "term depth does not grow in repetition " + std::to_string(j);
  return "";
}

inline PropertyStats run_property_suite(unsigned seed, int cases) {
  Stopwatch w;
  PropertyStats st;
  Generator gen(seed);
  std::mt19937 rng(seed * 7 + 1);
  for (int c = 0; c < cases; ++c) {
    auto prog = gen.rule_set();
    const RuleSet& R = prog.rules;
    st.cases++;
    auto note = [&](const std::string& what) { st.failures.push_back(what + "\n" + render(R)); };

    for (int k = 0; k < 3; ++k) {
      auto t = random_trigger(R, rng);
      if (!t || !is_star_unblockable(R, *t)) continue;
      st.star_checked++;
      for (const auto& hc : all_head_choices(R))
        if (!is_uc_unblockable(R, hc, *t)) {
          st.star_fail++;
          note("star-unblockable but not uc-unblockable: " + Printer(&R).trigger(*t));
          break;
        }
    }

    auto drpc = check(R, Notion::DRPC);
    auto rpcs = check(R, Notion::RPCs);
    if (drpc.result == CyclicityResult::Cyclic) {
      st.drpc_cyclic++;
      if (rpcs.result != CyclicityResult::Cyclic) {
        st.drpc_fail++;
        note("DRPC-cyclic but RPC_s says " + std::string(to_string(rpcs.result)));
      }
    }
    if (rpcs.result == CyclicityResult::Cyclic) {
      st.rpcs_cyclic++;
      for (auto mode : {AcyclicityMode::MFA, AcyclicityMode::RmfaLike})
        if (check_acyclic(R, 2, mode).result == AcyclicityResult::Terminating) {
          st.disjoint_fail++;
          note(std::string("acyclic (") + to_string(mode) + ") and RPC_s-cyclic");
        }
    }
    for (const auto* v : {&drpc, &rpcs})
      if (v->witness) {
        st.prefixes++;
        auto why = check_prefix(*v->witness);
        if (!why.empty()) {
          st.prefix_fail++;
          note(std::string(to_string(v->notion)) + " prefix: " + why);
        }
      }
  }
  st.ms = w.ms();
  return st;
}

}  // namespace oracle
