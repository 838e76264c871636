#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "approx.hpp"
#include "util.hpp"

namespace sentinel {

class InternalInconsistency : public Error {
 public:
  using Error::Error;
};

struct RuleDatabase {
  const Rule* rule = nullptr;
  FactSet facts;
  Substitution sigma_uc;
};

// D_ρ = body(ρ)σ_uc with σ_uc mapping each variable x to c_x
inline RuleDatabase rule_database(const Rule& rule) {
  RuleDatabase db;
  db.rule = &rule;
  for (auto x : rule.body_variables()) db.sigma_uc.bind(x, db_constant(x));
  db.facts.insert_all(db.sigma_uc.apply(rule.body()));
  return db;
}

enum class Notion { RPC, RPCs, DRPC };

inline const char* to_string(Notion n) {
  switch (n) {
    case Notion::RPC: return "rpc";
    case Notion::RPCs: return "rpcs";
    default: return "drpc";
  }
}

enum class UnblockCheck { Uc, Star, Off };

struct CyclicityBudget {
  uint32_t max_term_depth = 8;
  std::size_t max_triggers = 1000000;
  std::size_t max_head_choices = 1u << 16;
  double slice_seconds = 30;  // per (rho, hc) search; 0 disables
  Deadline deadline;
};

struct SearchOptions {
  bool deterministic_only = false;  // DRPC: deterministic triggers, out_1
  UnblockCheck unblock = UnblockCheck::Uc;
  bool injectivity_guard = true;
  bool stop_at_cyclic = true;
};

// Memo for unblockability keyed by (mode, hc, rule, substitution up to renaming of c_x constants).
class UnblockCache {
 public:
  struct Entry {
    bool unblockable = false;
    std::vector<uint8_t> consulted;
  };

  std::optional<Entry> get(const std::string& key) {
    std::lock_guard lock(mutex_);
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }
  void put(const std::string& key, Entry e) {
    std::lock_guard lock(mutex_);
    map_.emplace(key, std::move(e));
  }
  std::size_t size() {
    std::lock_guard lock(mutex_);
    return map_.size();
  }

 private:
  std::mutex mutex_;
  std::unordered_map<std::string, Entry> map_;
};

namespace detail {

inline void canonical_constants(Term t, ConstantMapping& g, unsigned& next) {
  if (t.is_constant()) {
    if (is_db_constant(t) && !g.contains(t)) g.map(t, Term::constant("__canon_" + std::to_string(next++)));
  } else if (t.is_functional()) {
    for (std::size_t i = 0; i < t.arity(); ++i) canonical_constants(t.arg(i), g, next);
  }
}

inline std::string unblock_key(UnblockCheck mode, const HeadChoice* hc, const Trigger& t) {
  ConstantMapping g;
  unsigned next = 0;
  for (auto v : t.rule->body_variables()) canonical_constants(*t.sigma.get(v), g, next);
  std::string key = std::to_string(static_cast<int>(mode)) + "|";
  if (hc)
    for (auto c : hc->values()) key += std::to_string(c) + ",";
  key += "|" + std::to_string(t.rule->index()) + "|";
  for (auto v : t.rule->body_variables()) key += std::to_string(g.apply(*t.sigma.get(v)).id()) + ",";
  return key;
}

inline std::optional<Term> find_rho_cyclic(const std::vector<Atom>& atoms, const Rule& rho) {
  std::optional<Term> found;
  std::function<void(Term)> visit = [&](Term t) {
    if (found || !t.is_functional()) return;
    if (is_rho_cyclic(t, rho)) {
      found = t;
      return;
    }
    for (std::size_t i = 0; i < t.arity(); ++i) visit(t.arg(i));
  };
  for (const auto& a : atoms)
    for (auto t : a.args) visit(t);
  return found;
}

inline bool substitution_less(const Trigger& a, const Trigger& b) {
  if (a.rule->index() != b.rule->index()) return a.rule->index() < b.rule->index();
  for (auto v : a.rule->body_variables()) {
    int c = compare_terms(*a.sigma.get(v), *b.sigma.get(v));
    if (c) return c < 0;
  }
  return false;
}

}  // namespace detail

struct LoggedTrigger {
  Trigger trigger;
  uint32_t round = 0;
};

enum class SearchStatus { Found, Fixpoint, Exhausted };

// Outcome of one (rho, hc) fixpoint: the fact set, the applied triggers in
// order, and which trigger first derived each fact (-1: rule database).
struct FactSetSearch {
  const Rule* rho = nullptr;
  HeadChoice hc;
  SearchOptions options;
  RuleDatabase database;
  FactSet facts;
  std::vector<LoggedTrigger> log;
  std::unordered_map<Atom, long, AtomHash> provenance;
  std::optional<Term> cyclic_term;
  long cyclic_trigger = -1;
  SearchStatus status = SearchStatus::Fixpoint;
  std::string exhausted_reason;
  std::size_t explored = 0;
  std::size_t unblock_checks = 0;

  std::vector<Atom> output(const Trigger& t) const { return options.deterministic_only ? out(t, 1) : out_hc(t, hc); }
};

inline FactSetSearch prefix_search(const RuleSet& rules, const HeadChoice& hc, const Rule& rho,
                                   const SearchOptions& options, const CyclicityBudget& budget = {},
                                   UnblockCache* cache = nullptr) {
  FactSetSearch s;
  s.rho = &rho;
  s.hc = hc;
  s.options = options;
  s.database = rule_database(rho);
  s.facts = s.database.facts;
  for (const auto& f : s.facts) s.provenance[f] = -1;

  Deadline deadline = budget.deadline;
  if (budget.slice_seconds > 0) deadline = deadline.min(Deadline::after(budget.slice_seconds));

  std::unordered_set<Trigger, TriggerHash> seen;
  std::vector<Atom> delta;
  bool truncated = false;

  auto apply = [&](const Trigger& t, uint32_t round) {
    long idx = static_cast<long>(s.log.size());
    s.log.push_back({t, round});
    auto o = s.output(t);
    for (const auto& a : o)
      if (s.facts.insert(a)) {
        s.provenance[a] = idx;
        delta.push_back(a);
      }
    if (options.stop_at_cyclic)
      if (auto c = detail::find_rho_cyclic(o, rho)) {
        s.cyclic_term = *c;
        s.cyclic_trigger = idx;
        s.status = SearchStatus::Found;
        return true;
      }
    return false;
  };

  auto unblockable = [&](const Trigger& t) {
    if (options.unblock == UnblockCheck::Off || t.rule->datalog()) return true;
    const HeadChoice* key_hc = options.unblock == UnblockCheck::Uc ? &s.hc : nullptr;
    std::string key = detail::unblock_key(options.unblock, key_hc, t);
    if (cache)
      if (auto e = cache->get(key)) {
        // replay the head-choice reads of the memoized computation
        for (std::size_t i = 0; i < e->consulted.size(); ++i)
          if (e->consulted[i]) hc(rules[i]);
        return e->unblockable;
      }
    ++s.unblock_checks;
    UnblockCache::Entry e;
    if (options.unblock == UnblockCheck::Star) {
      e.unblockable = is_star_unblockable(rules, t);
    } else {
      e.consulted.assign(rules.size(), 0);
      HeadChoice local(hc.values());
      local.record_into(&e.consulted);
      e.unblockable = is_uc_unblockable(rules, local, t);
      for (std::size_t i = 0; i < e.consulted.size(); ++i)
        if (e.consulted[i]) hc(rules[i]);
    }
    if (cache) cache->put(key, e);
    return e.unblockable;
  };

  delta.assign(s.facts.begin(), s.facts.end());
  Trigger first(rho, s.database.sigma_uc);
  seen.insert(first);
  if (apply(first, 0)) return s;

  for (uint32_t round = 1;; ++round) {
    std::vector<Trigger> cands;
    for (const auto& f : delta)
      for (const auto& r : rules) {
        if (options.deterministic_only && !r.deterministic()) continue;
        triggers_using(r, f, s.facts, [&](Trigger t) {
          if (seen.insert(t).second) cands.push_back(std::move(t));
          return true;
        });
      }
    delta.clear();
    if (cands.empty()) break;
    std::sort(cands.begin(), cands.end(), detail::substitution_less);
    for (const auto& t : cands) {
      if (++s.explored > budget.max_triggers) {
        s.status = SearchStatus::Exhausted;
        s.exhausted_reason = "trigger budget";
        return s;
      }
      if (deadline.expired()) {
        s.status = SearchStatus::Exhausted;
        s.exhausted_reason = "time";
        return s;
      }
      bool cyclic_range = false;
      for (auto& [v, val] : t.sigma) cyclic_range = cyclic_range || is_cyclic(val);
      if (cyclic_range) continue;
      if (options.injectivity_guard && t.rule == &rho && !t.sigma.injective()) continue;
      if (!unblockable(t)) continue;
      bool deep = false;
      for (const auto& a : s.output(t))
        for (auto x : a.args) deep = deep || x.depth() > budget.max_term_depth;
      if (deep) {
        truncated = true;
        continue;
      }
      if (apply(t, round)) return s;
    }
  }
  if (truncated) {
    s.status = SearchStatus::Exhausted;
    s.exhausted_reason = "term depth cap";
  }
  return s;
}

inline FactSetSearch rpc_fact_set(const RuleSet& rules, const HeadChoice& hc, const Rule& rho,
                                  const CyclicityBudget& budget = {}, bool injectivity_guard = true,
                                  bool force_unblockable = false, UnblockCache* cache = nullptr) {
  SearchOptions o;
  o.injectivity_guard = injectivity_guard;
  o.unblock = force_unblockable ? UnblockCheck::Off : UnblockCheck::Uc;
  return prefix_search(rules, hc, rho, o, budget, cache);
}

inline FactSetSearch drpc_fact_set(const RuleSet& rules, const Rule& rho, const CyclicityBudget& budget = {},
                                   UnblockCache* cache = nullptr) {
  if (!rho.deterministic()) throw Error("drpc needs a deterministic rule");
  SearchOptions o;
  o.deterministic_only = true;
  o.unblock = UnblockCheck::Star;
  return prefix_search(rules, HeadChoice::uniform(rules, 1), rho, o, budget, cache);
}

// ---------------------------------------------------------------------------
// Prefixes

struct PrefixValidation {
  bool loaded_replay = false;
  bool unblockability_checked = false;
  bool rho_cyclic_output = false;
  bool g_consistent = false;
  bool reversible_j0 = false;
  std::string note;
};

struct CyclicityPrefix {
  const Rule* rule = nullptr;
  HeadChoice hc;
  bool deterministic = false;  // outputs are out_1 (DRPC) instead of out_hc
  FactSet database;
  std::vector<Trigger> triggers;
  ConstantMapping g_lambda;
  Term cyclic_term;
  PrefixValidation validation;

  std::vector<Atom> output(const Trigger& t) const { return deterministic ? out(t, 1) : out_hc(t, hc); }
};

inline CyclicityPrefix extract_prefix(const RuleSet& rules, const FactSetSearch& s) {
  if (s.status != SearchStatus::Found || s.cyclic_trigger < 0)
    throw Error("extract_prefix needs a search that found a rho-cyclic term");
  std::vector<long> needed{s.cyclic_trigger};
  std::vector<long> stack{s.cyclic_trigger};
  while (!stack.empty()) {
    long i = stack.back();
    stack.pop_back();
    if (i < 0 || static_cast<std::size_t>(i) >= s.log.size())
      throw InternalInconsistency("provenance refers to a missing trigger");
    for (const auto& a : body_instance(s.log[i].trigger)) {
      auto it = s.provenance.find(a);
      if (it == s.provenance.end())
        throw InternalInconsistency("no provenance for body fact " + to_string(a));
      long p = it->second;
      if (p >= 0 && std::find(needed.begin(), needed.end(), p) == needed.end()) {
        if (p >= i) throw InternalInconsistency("provenance is not ordered");
        needed.push_back(p);
        stack.push_back(p);
      }
    }
  }
  if (std::find(needed.begin(), needed.end(), 0L) == needed.end()) needed.push_back(0);
  std::sort(needed.begin(), needed.end());

  CyclicityPrefix pre;
  pre.rule = s.rho;
  pre.hc = s.hc;
  pre.deterministic = s.options.deterministic_only;
  pre.database = s.database.facts;
  pre.cyclic_term = *s.cyclic_term;
  for (long i : needed) pre.triggers.push_back(s.log[i].trigger);

  const Trigger& t0 = pre.triggers.front();
  const Trigger& tn = pre.triggers.back();
  if (t0.rule != s.rho || tn.rule != s.rho) throw InternalInconsistency("prefix must start and end with rho");
  for (auto x : s.rho->body_variables()) pre.g_lambda.map(*t0.sigma.get(x), *tn.sigma.get(x));

  auto& v = pre.validation;
  FactSet replay = pre.database;
  for (const auto& t : pre.triggers) {
    if (!is_loaded(t, replay)) throw InternalInconsistency("prefix replay: trigger not loaded");
    replay.insert_all(pre.output(t));
  }
  v.loaded_replay = true;
  v.unblockability_checked = s.options.unblock != UnblockCheck::Off;
  v.rho_cyclic_output = detail::find_rho_cyclic(pre.output(tn), *s.rho).has_value();
  v.g_consistent = pre.g_lambda.after(t0.sigma) == tn.sigma;
  v.reversible_j0 = true;
  for (std::size_t i = 1; i < pre.triggers.size(); ++i)
    if (!check_reversible(pre.g_lambda, skeleton(pre.triggers[i], rules)).reversible) v.reversible_j0 = false;
  v.note = "validated: j=0";
  return pre;
}

// First n*repetitions+1 triggers of the infinite sequence generated by the prefix.
inline std::vector<Trigger> unroll_prefix(const CyclicityPrefix& pre, unsigned repetitions) {
  if (repetitions == 0) throw Error("repetitions must be positive");
  std::vector<Trigger> out{pre.triggers.front()};
  for (unsigned j = 1; j <= repetitions; ++j) {
    ConstantMapping gj = pre.g_lambda.power(j - 1);
    for (std::size_t i = 1; i < pre.triggers.size(); ++i)
      out.emplace_back(*pre.triggers[i].rule, gj.after(pre.triggers[i].sigma));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verdicts

enum class CyclicityResult { Cyclic, NotDetected, ResourceExhausted };

inline const char* to_string(CyclicityResult r) {
  switch (r) {
    case CyclicityResult::Cyclic: return "cyclic";
    case CyclicityResult::NotDetected: return "not-detected";
    default: return "resource-exhausted";
  }
}

struct SearchStats {
  std::size_t triggers_explored = 0;
  std::size_t terms_created = 0;
  std::size_t unblock_checks = 0;
  std::size_t searches = 0;
  std::size_t head_choices = 0;
  double wall_ms = 0;
};

struct Verdict {
  Notion notion = Notion::RPCs;
  CyclicityResult result = CyclicityResult::NotDetected;
  std::optional<CyclicityPrefix> witness;
  SearchStats stats;
  std::string note;
};

struct CheckOptions {
  CyclicityBudget budget;
  bool injectivity_guard = true;
  bool force_unblockable = false;  // test hook: every unblockability check passes
  unsigned jobs = 1;
};

namespace detail {

struct SearchJob {
  HeadChoice hc;
  const Rule* rho;
};

inline SearchOptions options_for(Notion n, const CheckOptions& opt) {
  SearchOptions o;
  o.injectivity_guard = opt.injectivity_guard;
  if (n == Notion::DRPC) {
    o.deterministic_only = true;
    o.unblock = UnblockCheck::Star;
  }
  if (opt.force_unblockable) o.unblock = UnblockCheck::Off;
  return o;
}

inline void finish(const RuleSet& rules, Verdict& v, const FactSetSearch& s, const CheckOptions& opt) {
  v.result = CyclicityResult::Cyclic;
  v.witness = extract_prefix(rules, s);
  const auto& val = v.witness->validation;
  bool strict = !opt.force_unblockable && opt.injectivity_guard;
  if (strict && !(val.rho_cyclic_output && val.g_consistent && val.reversible_j0))
    throw InternalInconsistency("extracted prefix fails validation for rule " + s.rho->id());
}

// Runs jobs in order (optionally on several threads) and returns the index of
// the first job, in job order, whose search found a rho-cyclic term.
inline long run_jobs(const RuleSet& rules, const std::vector<SearchJob>& jobs, const SearchOptions& so,
                     const CheckOptions& opt, UnblockCache& cache, std::vector<std::optional<FactSetSearch>>& done) {
  done.assign(jobs.size(), std::nullopt);
  std::atomic<long> best{static_cast<long>(jobs.size())};
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      if (static_cast<long>(i) > best.load()) continue;
      auto s = prefix_search(rules, jobs[i].hc, *jobs[i].rho, so, opt.budget, &cache);
      bool found = s.status == SearchStatus::Found;
      done[i] = std::move(s);
      if (found) {
        long cur = best.load();
        while (static_cast<long>(i) < cur && !best.compare_exchange_weak(cur, static_cast<long>(i))) {
        }
      }
    }
  };
  unsigned n = std::max(1u, std::min<unsigned>(opt.jobs, static_cast<unsigned>(jobs.size())));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  long b = best.load();
  return b < static_cast<long>(jobs.size()) ? b : -1;
}

}  // namespace detail

inline Verdict check(const RuleSet& rules, Notion notion, const CheckOptions& opt = {}) {
  Stopwatch watch;
  std::size_t terms_before = detail::TermStore::global().size();
  Verdict v;
  v.notion = notion;
  UnblockCache cache;
  SearchOptions so = detail::options_for(notion, opt);
  bool exhausted = false;
  auto account = [&](const FactSetSearch& s) {
    v.stats.searches++;
    v.stats.triggers_explored += s.explored;
    v.stats.unblock_checks += s.unblock_checks;
    if (s.status == SearchStatus::Exhausted) {
      exhausted = true;
      if (v.note.empty()) v.note = "rule " + s.rho->id() + ": " + s.exhausted_reason;
    }
  };

  if (notion == Notion::RPCs || notion == Notion::DRPC) {
    std::vector<detail::SearchJob> jobs;
    if (notion == Notion::RPCs) {
      for (uint32_t i = 1; i <= rules.branching(); ++i)
        for (const auto& r : rules)
          if (r.generating()) jobs.push_back({HeadChoice::uniform(rules, i), &r});
      v.stats.head_choices = rules.branching();
    } else {
      for (const auto& r : rules)
        if (r.generating() && r.deterministic()) jobs.push_back({HeadChoice::uniform(rules, 1), &r});
      v.stats.head_choices = 1;
    }
    std::vector<std::optional<FactSetSearch>> done;
    long found = detail::run_jobs(rules, jobs, so, opt, cache, done);
    for (std::size_t i = 0; i < done.size(); ++i)
      if (done[i] && (found < 0 || static_cast<long>(i) <= found)) account(*done[i]);
    if (found >= 0) detail::finish(rules, v, *done[found], opt);
  } else {
    // all head choices, lexicographic over rule ids; a head choice is skipped
    // for rho when an earlier search for rho read only choices it agrees with
    std::vector<std::size_t> disj;
    for (const auto& r : rules)
      if (r.branching() > 1) disj.push_back(r.index());
    std::vector<uint32_t> cur(rules.size(), 1);
    std::map<const Rule*, std::vector<std::pair<std::vector<uint8_t>, std::vector<uint32_t>>>> history;
    bool more = true;
    while (more && v.result != CyclicityResult::Cyclic) {
      if (v.stats.head_choices >= opt.budget.max_head_choices || opt.budget.deadline.expired()) {
        exhausted = true;
        if (v.note.empty()) v.note = "head-choice budget";
        break;
      }
      v.stats.head_choices++;
      for (const auto& r : rules) {
        if (!r.generating()) continue;
        auto& hist = history[&r];
        bool covered = false;
        for (const auto& [mask, vals] : hist) {
          bool agree = true;
          for (std::size_t i = 0; i < mask.size() && agree; ++i)
            if (mask[i] && vals[i] != cur[i]) agree = false;
          if (agree) {
            covered = true;
            break;
          }
        }
        if (covered) continue;
        std::vector<uint8_t> consulted(rules.size(), 0);
        HeadChoice hc(cur);
        hc.record_into(&consulted);
        auto s = prefix_search(rules, hc, r, so, opt.budget, &cache);
        account(s);
        if (s.status == SearchStatus::Found) {
          s.hc = HeadChoice(cur);
          detail::finish(rules, v, s, opt);
          break;
        }
        if (s.status == SearchStatus::Fixpoint) hist.push_back({consulted, cur});
      }
      // odometer, last rule fastest
      more = false;
      for (std::size_t k = disj.size(); k-- > 0;) {
        std::size_t i = disj[k];
        if (cur[i] < rules[i].branching()) {
          cur[i]++;
          more = true;
          break;
        }
        cur[i] = 1;
      }
    }
  }

  if (v.result != CyclicityResult::Cyclic)
    v.result = exhausted ? CyclicityResult::ResourceExhausted : CyclicityResult::NotDetected;
  v.stats.terms_created = detail::TermStore::global().size() - terms_before;
  v.stats.wall_ms = watch.ms();
  return v;
}

}  // namespace sentinel
