#include <gtest/gtest.h>

#include "support.hpp"

using namespace sentinel;

namespace {

RuleSet load(const char* f) { return parse(oracle::read_corpus(f)).rules; }

}  // namespace

TEST(RuleDatabase, UniqueConstantPerVariable) {
  auto R = load("guarded_chain.drls");
  auto db = rule_database(R[0]);
  EXPECT_EQ(Printer(&R).facts(db.facts), "{B(c_X), R(c_W,c_X)}");
  EXPECT_TRUE(db.sigma_uc.injective());
}

TEST(Cyclicity, BikeEngineWitness) {
  auto R = load("bike_engine_loop.drls");
  Stopwatch w;
  auto v = check(R, Notion::RPCs);
  ASSERT_EQ(v.result, CyclicityResult::Cyclic);
  ASSERT_TRUE(v.witness);
  const auto& p = *v.witness;
  Printer pr(&R);
  ASSERT_EQ(p.triggers.size(), 3u);
  EXPECT_EQ(pr.trigger(p.triggers[0]), "<(1), [X/c_X]>");
  EXPECT_EQ(pr.trigger(p.triggers[1]), "<(2), [X/f_V(c_X)]>");
  EXPECT_EQ(pr.trigger(p.triggers[2]), "<(1), [X/f_W(f_V(c_X))]>");
  EXPECT_EQ(pr.mapping(p.g_lambda), "c_X -> f_W(f_V(c_X))");
  EXPECT_EQ(p.hc.values(), (std::vector<uint32_t>{1, 1}));
  EXPECT_TRUE(p.validation.loaded_replay);
  EXPECT_TRUE(p.validation.reversible_j0);
  EXPECT_TRUE(p.validation.g_consistent);
  EXPECT_EQ(p.validation.note, "validated: j=0");
  EXPECT_LT(w.ms(), 5000.0);

  EXPECT_EQ(check(R, Notion::DRPC).result, CyclicityResult::NotDetected);
  EXPECT_EQ(check(R, Notion::RPC).result, CyclicityResult::Cyclic);
}

TEST(Cyclicity, InverseRulesBlockTheLoop) {
  for (const char* f : {"example1.drls", "bike_engine_isin.drls"}) {
    auto R = load(f);
    for (auto n : {Notion::RPC, Notion::RPCs, Notion::DRPC}) EXPECT_EQ(check(R, n).result, CyclicityResult::NotDetected) << f;
    auto s = rpc_fact_set(R, HeadChoice::uniform(R, 1), R[0]);
    EXPECT_EQ(s.status, SearchStatus::Fixpoint);
    EXPECT_FALSE(s.cyclic_term);
  }
}

TEST(Cyclicity, InjectivityGuard) {
  auto R = load("injectivity_guard.drls");
  EXPECT_EQ(check(R, Notion::RPCs).result, CyclicityResult::NotDetected);
  EXPECT_EQ(check(R, Notion::RPC).result, CyclicityResult::NotDetected);
  CheckOptions off;
  off.injectivity_guard = false;
  auto v = check(R, Notion::RPCs, off);
  ASSERT_EQ(v.result, CyclicityResult::Cyclic);
  EXPECT_EQ(v.witness->rule, &R[0]);
  Printer pr(&R);
  EXPECT_EQ(pr.mapping(v.witness->g_lambda), "c_X -> f_V(f_U(c_X,c_Y)), c_Y -> f_V(f_U(c_X,c_Y))");
  EXPECT_FALSE(v.witness->validation.reversible_j0);
}

TEST(Cyclicity, RmfcSetIsNotFlagged) {
  auto R = load("rmfc_regression.drls");
  EXPECT_EQ(check(R, Notion::DRPC).result, CyclicityResult::NotDetected);
  EXPECT_EQ(check(R, Notion::RPCs).result, CyclicityResult::NotDetected);
  // the generic trigger of the second rule over the first rule's term is blocked
  Term cx = db_constant(Term::variable("X")), cy = db_constant(Term::variable("Y"));
  Term t = Term::functional(R[0].skolem_symbols()[0], {cx, cy});
  Trigger lam(R[1], Substitution{{Term::variable("X"), cy}, {Term::variable("Z"), t}});
  EXPECT_FALSE(is_star_unblockable(R, lam));
}

TEST(Cyclicity, DeterministicNotions) {
  for (const char* f : {"self_loop.drls", "drpc_chain.drls", "guarded_chain.drls"}) {
    auto R = load(f);
    auto d = check(R, Notion::DRPC);
    EXPECT_EQ(d.result, CyclicityResult::Cyclic) << f;
    EXPECT_TRUE(d.witness->deterministic);
    EXPECT_EQ(check(R, Notion::RPCs).result, CyclicityResult::Cyclic) << f;
  }
  auto R = load("uc_vs_star.drls");
  EXPECT_EQ(check(R, Notion::DRPC).result, CyclicityResult::NotDetected);
  EXPECT_EQ(check(R, Notion::RPCs).result, CyclicityResult::Cyclic);
}

TEST(Cyclicity, TerminatingSetsAreNotFlagged) {
  for (const char* f : {"datalog_only.drls", "terminating_disjunctive.drls", "reversibility_subterm.drls"}) {
    auto R = load(f);
    for (auto n : {Notion::RPC, Notion::RPCs, Notion::DRPC}) EXPECT_EQ(check(R, n).result, CyclicityResult::NotDetected) << f;
  }
  EXPECT_EQ(check(RuleSet{}, Notion::RPCs).result, CyclicityResult::NotDetected);
}

TEST(Cyclicity, BudgetsGiveResourceExhausted) {
  auto R = load("self_loop.drls");
  CheckOptions o;
  o.budget.max_term_depth = 1;
  EXPECT_EQ(check(R, Notion::RPCs, o).result, CyclicityResult::ResourceExhausted);
  o = {};
  o.budget.deadline = Deadline::after(1e-9);
  while (!o.budget.deadline.expired()) {
  }
  EXPECT_EQ(check(load("injectivity_guard.drls"), Notion::RPCs, o).result, CyclicityResult::ResourceExhausted);
}

TEST(Prefix, UnrollLengthAndShape) {
  auto R = load("bike_engine_loop.drls");
  auto v = check(R, Notion::RPCs);
  ASSERT_TRUE(v.witness);
  auto seq = unroll_prefix(*v.witness, 3);
  ASSERT_EQ(seq.size(), 7u);
  Printer pr(&R);
  EXPECT_EQ(pr.trigger(seq[3]), "<(2), [X/f_V(f_W(f_V(c_X)))]>");
  EXPECT_EQ(pr.trigger(seq[6]), "<(1), [X/f_W(f_V(f_W(f_V(f_W(f_V(c_X))))))]>");
  EXPECT_EQ(unroll_prefix(*v.witness, 1).size(), 3u);
  EXPECT_THROW(unroll_prefix(*v.witness, 0), Error);
  FactSet F = v.witness->database;
  for (const auto& t : seq) {
    EXPECT_TRUE(is_loaded(t, F));
    F.insert_all(v.witness->output(t));
  }
}

TEST(Prefix, ExtractNeedsAHit) {
  auto R = load("datalog_only.drls");
  auto R2 = load("terminating_disjunctive.drls");
  auto s = rpc_fact_set(R2, HeadChoice::uniform(R2, 1), R2[1]);
  EXPECT_THROW(extract_prefix(R2, s), Error);
}

// prefix fact sets with every unblockability check stubbed to pass, against
// the naive fixpoint, term-depth cap 3
TEST(PrefixSearch, MatchesNaiveFixpoint) {
  oracle::Generator gen(211);
  int compared = 0;
  for (int i = 0; i < 200; ++i) {
    auto prog = gen.rule_set();
    const auto& R = prog.rules;
    for (const auto& rho : R) {
      if (!rho.generating()) continue;
      for (const auto& hc : oracle::all_head_choices(R)) {
        SearchOptions o;
        o.unblock = UnblockCheck::Off;
        o.stop_at_cyclic = false;
        CyclicityBudget b;
        b.max_term_depth = 3;
        auto s = prefix_search(R, hc, rho, o, b);
        EXPECT_EQ(oracle::as_set(s.facts), oracle::rpc_facts(R, hc, rho, 3)) << render(R) << "rho " << rho.id();
        ++compared;
      }
    }
  }
  EXPECT_GT(compared, 150);
}

// the recorded head-choice reads make pruned enumeration agree with the full one
TEST(PrefixSearch, PrunedEnumerationAgreesWithExhaustive) {
  oracle::Generator gen(223);
  for (int i = 0; i < 150; ++i) {
    auto prog = gen.rule_set();
    const auto& R = prog.rules;
    bool any = false;
    for (const auto& hc : oracle::all_head_choices(R))
      for (const auto& rho : R)
        if (rho.generating() && rpc_fact_set(R, hc, rho).status == SearchStatus::Found) any = true;
    auto v = check(R, Notion::RPC);
    if (v.result == CyclicityResult::ResourceExhausted) continue;
    EXPECT_EQ(v.result == CyclicityResult::Cyclic, any) << render(R);
  }
}

TEST(PrefixSearch, ParallelJobsPickTheSameWitness) {
  for (const char* f : {"bike_engine_loop.drls", "drpc_chain.drls", "uc_vs_star.drls"}) {
    auto R = load(f);
    CheckOptions o;
    o.jobs = 4;
    auto a = check(R, Notion::RPCs), b = check(R, Notion::RPCs, o);
    ASSERT_TRUE(a.witness && b.witness);
    EXPECT_EQ(Printer(&R).trigger(a.witness->triggers.back()), Printer(&R).trigger(b.witness->triggers.back()));
  }
}
