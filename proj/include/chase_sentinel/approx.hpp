#pragma once

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "matcher.hpp"
#include "ruleio.hpp"
#include "util.hpp"

namespace sentinel {

enum class AbstractionKind { Star, UniqueConstants };

// h⋆ and h^uc relative to the skeleton of a pivot trigger.
class TermAbstraction {
 public:
  TermAbstraction(AbstractionKind kind, TermSet skeleton) : kind_(kind), skeleton_(std::move(skeleton)) {}

  static TermAbstraction star(const Trigger& pivot, const RuleSet& rules) {
    return {AbstractionKind::Star, skeleton(pivot, rules)};
  }
  static TermAbstraction unique_constants(const Trigger& pivot, const RuleSet& rules) {
    return {AbstractionKind::UniqueConstants, skeleton(pivot, rules)};
  }

  AbstractionKind kind() const { return kind_; }
  const TermSet& skeleton_terms() const { return skeleton_; }

  Term apply(Term t) const {
    if (skeleton_.count(t)) return t;
    if (kind_ == AbstractionKind::UniqueConstants) {
      if (t.is_functional()) return uc_constant(t.function());
      if (is_uc_constant(t)) return t;
    }
    return sentinel::star();
  }

  Atom apply(const Atom& a) const {
    Atom out;
    out.pred = a.pred;
    for (auto t : a.args) out.args.push_back(apply(t));
    return out;
  }

 private:
  AbstractionKind kind_;
  TermSet skeleton_;
};

inline Term abstract(const TermAbstraction& h, Term t) { return h.apply(t); }

enum class ApproxMode { WithHeadChoice, DisjunctionAsConjunction };

struct OverApproximation {
  FactSet facts;
  Trigger pivot;
  ApproxMode mode = ApproxMode::DisjunctionAsConjunction;
  std::optional<HeadChoice> hc;
  bool stopped_early = false;  // construction stopped once the pivot became obsolete
};

namespace detail {

inline std::vector<Term> sorted_terms(const TermSet& set) {
  std::vector<Term> v(set.begin(), set.end());
  std::sort(v.begin(), v.end(), [](Term a, Term b) { return compare_terms(a, b) < 0; });
  return v;
}

inline void add_all_tuples(FactSet& out, PredId p, const std::vector<Term>& consts) {
  uint32_t n = predicate_arity(p);
  std::vector<std::size_t> idx(n, 0);
  for (;;) {
    std::vector<Term> args;
    for (auto i : idx) args.push_back(consts[i]);
    out.insert(Atom(p, std::move(args)));
    std::size_t k = 0;
    while (k < n && ++idx[k] == consts.size()) idx[k++] = 0;
    if (k == n) break;
  }
}

inline OverApproximation over_approx_impl(const RuleSet& rules, const Trigger& pivot, const TermAbstraction& h,
                                          const HeadChoice* hc, bool stop_when_obsolete) {
  OverApproximation o;
  o.pivot = pivot;
  o.mode = hc ? ApproxMode::WithHeadChoice : ApproxMode::DisjunctionAsConjunction;
  if (hc) o.hc = *hc;
  FactSet& F = o.facts;

  // item 1: every fact over the skeleton's constants and ⋆
  std::vector<Term> consts;
  for (auto t : sorted_terms(h.skeleton_terms()))
    if (t.is_constant()) consts.push_back(t);
  if (std::find(consts.begin(), consts.end(), star()) == consts.end()) consts.push_back(star());
  for (auto p : rules.predicates()) add_all_tuples(F, p, consts);

  // item 2
  F.insert_all(birth_facts(pivot, rules));

  std::vector<Atom> pivot_hc;
  std::vector<std::vector<Atom>> pivot_all;
  if (hc)
    pivot_hc = out_hc(pivot, *hc);
  else
    for (std::size_t i = 1; i <= pivot.rule->branching(); ++i) pivot_all.push_back(out(pivot, i));

  std::unordered_set<PredId> head_preds;
  for (const auto& d : pivot.rule->heads())
    for (const auto& a : d.atoms) head_preds.insert(a.pred);

  auto obsolete_now = [&] { return is_obsolete(pivot, F); };
  if (stop_when_obsolete && obsolete_now()) {
    o.stopped_early = true;
    return o;
  }

  std::unordered_set<Trigger, TriggerHash> seen;
  std::vector<Trigger> found;
  for (std::size_t p = 0; p < F.size(); ++p) {
    Atom fact = F[p];
    found.clear();
    for (const auto& r : rules)
      triggers_using(r, fact, F, [&](Trigger t) {
        if (seen.insert(t).second) found.push_back(std::move(t));
        return true;
      });
    bool relevant = false;
    for (const auto& t : found) {
      std::vector<Atom> outs;
      if (hc) {
        outs = out_hc(t, *hc);
        if (same_atom_set(outs, pivot_hc)) continue;
      } else {
        if (t.rule == pivot.rule) {
          bool all_same = true;
          for (std::size_t i = 1; i <= t.rule->branching() && all_same; ++i)
            all_same = same_atom_set(out(t, i), pivot_all[i - 1]);
          if (all_same) continue;
        }
        outs = out_all(t);
      }
      for (const auto& a : outs)
        if (F.insert(h.apply(a)) && head_preds.count(a.pred)) relevant = true;
    }
    if (stop_when_obsolete && relevant && obsolete_now()) {
      o.stopped_early = true;
      return o;
    }
  }
  return o;
}

}  // namespace detail

// O(R, hc, λ, h)
inline OverApproximation build_over_approx(const RuleSet& rules, const Trigger& pivot, const TermAbstraction& h,
                                           const HeadChoice& hc) {
  return detail::over_approx_impl(rules, pivot, h, &hc, false);
}

// O(R, λ, h): disjunctions read as conjunctions
inline OverApproximation build_over_approx(const RuleSet& rules, const Trigger& pivot, const TermAbstraction& h) {
  return detail::over_approx_impl(rules, pivot, h, nullptr, false);
}

inline bool is_star_unblockable(const RuleSet& rules, const Trigger& t) {
  if (t.rule->datalog()) return true;
  auto h = TermAbstraction::star(t, rules);
  auto o = detail::over_approx_impl(rules, t, h, nullptr, true);
  if (log_enabled(LogLevel::Trace)) log(LogLevel::Trace, "O-set (star) for " + Printer(&rules).trigger(t) + ":\n" + render_facts(o.facts));
  return !o.stopped_early;
}

inline bool is_uc_unblockable(const RuleSet& rules, const HeadChoice& hc, const Trigger& t) {
  if (t.rule->datalog()) return true;
  auto h = TermAbstraction::unique_constants(t, rules);
  auto o = detail::over_approx_impl(rules, t, h, &hc, true);
  if (log_enabled(LogLevel::Trace)) log(LogLevel::Trace, "O-set (uc) for " + Printer(&rules).trigger(t) + ":\n" + render_facts(o.facts));
  return !o.stopped_early;
}

// ---------------------------------------------------------------------------
// Reversible constant mappings

struct ReversibilityCertificate {
  ConstantMapping g;
  TermSet domain;
  bool reversible = true;
  int violated_condition = 0;  // 1, 2 or 3 when not reversible
  std::string detail;
};

inline ReversibilityCertificate check_reversible(const ConstantMapping& g, const TermSet& T) {
  ReversibilityCertificate cert{g, T, true, 0, ""};
  auto terms = detail::sorted_terms(T);
  auto fail = [&](int cond, std::string why) {
    cert.reversible = false;
    cert.violated_condition = cond;
    cert.detail = std::move(why);
    return cert;
  };
  for (auto t : terms)
    if (t.is_constant() && !g.contains(t)) return fail(1, "no image for " + to_string(t));
  std::unordered_map<Term, Term, TermHash> image_of;
  for (auto t : terms) {
    Term gt = g.apply(t);
    auto [it, fresh] = image_of.emplace(gt, t);
    if (!fresh) return fail(2, to_string(it->second) + " and " + to_string(t) + " both map to " + to_string(gt));
  }
  for (auto c : terms) {
    if (!c.is_constant()) continue;
    TermSet subs;
    collect_subterms(g.apply(c), subs);
    for (auto u : terms)
      if (u.is_functional() && subs.count(g.apply(u)))
        return fail(3, "image of " + to_string(u) + " is a subterm of the image of " + to_string(c));
  }
  return cert;
}

class NotReversible : public Error {
 public:
  using Error::Error;
};

inline Trigger transport_trigger(const Trigger& t, const ConstantMapping& g, const RuleSet& rules) {
  auto cert = check_reversible(g, skeleton(t, rules));
  if (!cert.reversible)
    throw NotReversible("not-reversible: condition " + std::to_string(cert.violated_condition) + " (" + cert.detail + ")");
  return Trigger(*t.rule, g.after(t.sigma));
}

}  // namespace sentinel
