#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "chase.hpp"
#include "cyclicity.hpp"
#include "ruleio.hpp"
#include "termination.hpp"

namespace sentinel {

using json = nlohmann::ordered_json;

enum class Combined { Terminating, NeverTerminating, Unknown };

inline const char* to_string(Combined c) {
  switch (c) {
    case Combined::Terminating: return "terminating";
    case Combined::NeverTerminating: return "never-terminating";
    default: return "unknown";
  }
}

class SoundnessViolation : public Error {
 public:
  using Error::Error;
};

struct ClassifyOptions {
  std::vector<std::string> notions;  // empty: acyclic, drpc, rpcs, stop at the first definitive verdict
  bool run_all = false;
  unsigned k = 2;
  AcyclicityMode acyclic_mode = AcyclicityMode::RmfaLike;
  double timeout = 0;
  uint32_t term_depth = 8;
  unsigned jobs = 1;
  bool injectivity_guard = true;
};

struct ClassificationReport {
  std::string file;
  std::optional<AcyclicityVerdict> acyclic;
  std::vector<Verdict> cyclicity;
  Combined combined = Combined::Unknown;
  double ms = 0;
};

inline Combined combine(const ClassificationReport& r) {
  bool cyclic = std::any_of(r.cyclicity.begin(), r.cyclicity.end(),
                            [](const Verdict& v) { return v.result == CyclicityResult::Cyclic; });
  bool term = r.acyclic && r.acyclic->result == AcyclicityResult::Terminating;
  if (cyclic && term) throw SoundnessViolation("rule set is both acyclic and cyclic: " + r.file);
  if (cyclic) return Combined::NeverTerminating;
  if (term) return Combined::Terminating;
  return Combined::Unknown;
}

inline ClassificationReport classify(const RuleSet& rules, const ClassifyOptions& opt, const std::string& file = "") {
  Stopwatch watch;
  ClassificationReport rep;
  rep.file = file;
  Deadline deadline = Deadline::after(opt.timeout);
  std::vector<std::string> order = opt.notions;
  if (order.empty()) order = {"acyclic", "drpc", "rpcs"};
  for (const auto& n : order) {
    if (n == "acyclic") {
      AcyclicityBudget b;
      b.deadline = deadline;
      rep.acyclic = check_acyclic(rules, opt.k, opt.acyclic_mode, b);
      if (!opt.run_all && rep.acyclic->result == AcyclicityResult::Terminating) break;
      continue;
    }
    Notion notion = n == "rpc" ? Notion::RPC : n == "drpc" ? Notion::DRPC : Notion::RPCs;
    CheckOptions co;
    co.budget.deadline = deadline;
    co.budget.max_term_depth = opt.term_depth;
    co.injectivity_guard = opt.injectivity_guard;
    co.jobs = opt.jobs;
    rep.cyclicity.push_back(check(rules, notion, co));
    if (!opt.run_all && rep.cyclicity.back().result == CyclicityResult::Cyclic) break;
  }
  rep.combined = combine(rep);
  rep.ms = watch.ms();
  return rep;
}

// ---------------------------------------------------------------------------
// JSON

inline json substitution_json(const Substitution& s, const Rule& r) {
  json o = json::object();
  for (auto v : r.body_variables())
    if (auto t = s.get(v)) o[v.name()] = to_string(*t);
  return o;
}

inline json witness_json(const CyclicityPrefix& w) {
  json j;
  j["rule"] = w.rule->id();
  j["ruleText"] = render(*w.rule);
  j["headChoice"] = w.hc.values();
  j["deterministic"] = w.deterministic;
  json ts = json::array();
  for (const auto& t : w.triggers) ts.push_back({{"rule", t.rule->id()}, {"substitution", substitution_json(t.sigma, *t.rule)}});
  j["triggers"] = ts;
  json g = json::object();
  for (auto& [c, v] : w.g_lambda) g[to_string(c)] = to_string(v);
  j["gLambda"] = g;
  j["cyclicTerm"] = to_string(w.cyclic_term);
  const auto& v = w.validation;
  j["validation"] = {{"loadedReplay", v.loaded_replay},
                     {"unblockabilityChecked", v.unblockability_checked},
                     {"rhoCyclicOutput", v.rho_cyclic_output},
                     {"gConsistent", v.g_consistent},
                     {"reversibleJ0", v.reversible_j0},
                     {"note", v.note}};
  return j;
}

inline json report_json(const ClassificationReport& r) {
  json j;
  j["schema"] = 1;
  j["file"] = r.file;
  json res = json::array();
  if (r.acyclic) {
    const auto& a = *r.acyclic;
    json x{{"notion", "acyclic"}, {"mode", to_string(a.mode)}, {"k", a.k}, {"result", to_string(a.result)}};
    x["cyclicTerm"] = a.cyclic_term ? json(to_string(*a.cyclic_term)) : json(nullptr);
    x["facts"] = a.facts;
    x["blocked"] = a.blocked;
    x["ms"] = a.wall_ms;
    if (!a.note.empty()) x["note"] = a.note;
    res.push_back(x);
  }
  for (const auto& v : r.cyclicity) {
    json x{{"notion", to_string(v.notion)}, {"result", to_string(v.result)}};
    x["stats"] = {{"triggersExplored", v.stats.triggers_explored}, {"termsCreated", v.stats.terms_created},
                  {"unblockChecks", v.stats.unblock_checks},      {"searches", v.stats.searches},
                  {"headChoices", v.stats.head_choices},          {"ms", v.stats.wall_ms}};
    x["witness"] = v.witness ? witness_json(*v.witness) : json(nullptr);
    if (!v.note.empty()) x["note"] = v.note;
    res.push_back(x);
  }
  j["results"] = res;
  j["combined"] = to_string(r.combined);
  j["ms"] = r.ms;
  return j;
}

// ---------------------------------------------------------------------------
// Text

inline std::string witness_text(const RuleSet& rules, const CyclicityPrefix& w) {
  Printer p(&rules);
  std::ostringstream os;
  os << "  rule (" << w.rule->id() << "): " << render(*w.rule) << "\n";
  os << "  head choice:";
  for (std::size_t i = 0; i < w.hc.values().size(); ++i) os << " (" << rules[i].id() << ")->" << w.hc.values()[i];
  os << "\n  prefix:\n";
  for (const auto& t : w.triggers) os << "    " << p.trigger(t) << "\n";
  os << "  g: " << p.mapping(w.g_lambda) << "\n";
  os << "  cyclic term: " << p.term(w.cyclic_term) << "\n";
  os << "  " << w.validation.note << "\n";
  return os.str();
}

inline std::string report_text(const RuleSet& rules, const ClassificationReport& r) {
  std::ostringstream os;
  if (!r.file.empty()) os << "file: " << r.file << "\n";
  if (r.acyclic) {
    os << "acyclic (" << to_string(r.acyclic->mode) << ", k=" << r.acyclic->k << "): " << to_string(r.acyclic->result);
    if (r.acyclic->cyclic_term) os << "  [" << Printer(&rules).term(*r.acyclic->cyclic_term) << "]";
    if (!r.acyclic->note.empty()) os << "  (" << r.acyclic->note << ")";
    os << "\n";
  }
  for (const auto& v : r.cyclicity) {
    os << to_string(v.notion) << ": " << to_string(v.result);
    if (!v.note.empty()) os << "  (" << v.note << ")";
    os << "\n";
    if (v.witness) os << witness_text(rules, *v.witness);
  }
  os << "combined: " << to_string(r.combined) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Batch

inline std::string bucket_of(const RuleSet& rules) {
  std::size_t gen = 0;
  bool det = true;
  for (const auto& r : rules) {
    gen += r.generating();
    det = det && r.deterministic();
  }
  std::string b = det ? "det:" : "disj:";
  if (gen == 0) return b + "0";
  if (gen < 20) return b + "1-19";
  if (gen < 100) return b + "20-99";
  if (gen < 1000) return b + "100-999";
  return b + "1000+";
}

struct BatchRow {
  std::string file;
  std::string bucket;
  std::string acyclic, drpc, rpcs, combined;
  double ms = 0;
  std::string error;
};

inline BatchRow batch_row(const std::filesystem::path& path, const ClassifyOptions& base) {
  BatchRow row;
  row.file = path.filename().string();
  Stopwatch w;
  try {
    auto prog = parse_file(path.string());
    row.bucket = bucket_of(prog.rules);
    ClassifyOptions o = base;
    o.notions = {"acyclic", "drpc", "rpcs"};
    o.run_all = true;
    auto rep = classify(prog.rules, o, row.file);
    row.acyclic = to_string(rep.acyclic->result);
    row.drpc = to_string(rep.cyclicity[0].result);
    row.rpcs = to_string(rep.cyclicity[1].result);
    row.combined = to_string(rep.combined);
  } catch (const SoundnessViolation&) {
    throw;
  } catch (const std::exception& e) {
    row.error = e.what();
    row.combined = "error";
  }
  row.ms = w.ms();
  return row;
}

inline std::vector<BatchRow> run_batch(const std::vector<std::filesystem::path>& files, const ClassifyOptions& opt,
                                       unsigned jobs) {
  std::vector<BatchRow> rows(files.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex m;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= files.size()) return;
      try {
        rows[i] = batch_row(files[i], opt);
      } catch (...) {
        std::lock_guard lock(m);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(files.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (fatal) std::rethrow_exception(fatal);
  return rows;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) o += c == '"' ? std::string("\"\"") : std::string(1, c);
  return o + "\"";
}

inline std::string batch_csv(const std::vector<BatchRow>& rows) {
  std::ostringstream os;
  os << "file,bucket,acyclic,drpc,rpcs,combined,ms\n";
  for (const auto& r : rows)
    os << csv_escape(r.file) << "," << r.bucket << "," << r.acyclic << "," << r.drpc << "," << r.rpcs << ","
       << r.combined << "," << std::fixed << std::setprecision(1) << r.ms << "\n";
  return os.str();
}

inline std::string batch_summary(const std::vector<BatchRow>& rows) {
  struct Count {
    int files = 0, term = 0, never = 0, unknown = 0;
  };
  std::map<std::string, Count> by;
  int errors = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      ++errors;
      continue;
    }
    auto& c = by[r.bucket];
    c.files++;
    if (r.combined == "terminating") c.term++;
    else if (r.combined == "never-terminating") c.never++;
    else c.unknown++;
  }
  std::ostringstream os;
  os << std::left << std::setw(14) << "bucket" << std::right << std::setw(7) << "files" << std::setw(13) << "terminating"
     << std::setw(19) << "never-terminating" << std::setw(9) << "unknown" << "\n";
  Count total;
  for (auto& [b, c] : by) {
    os << std::left << std::setw(14) << b << std::right << std::setw(7) << c.files << std::setw(13) << c.term
       << std::setw(19) << c.never << std::setw(9) << c.unknown << "\n";
    total.files += c.files;
    total.term += c.term;
    total.never += c.never;
    total.unknown += c.unknown;
  }
  os << std::left << std::setw(14) << "total" << std::right << std::setw(7) << total.files << std::setw(13) << total.term
     << std::setw(19) << total.never << std::setw(9) << total.unknown << "\n";
  if (errors) os << "errors: " << errors << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Entry point

namespace exit_code {
constexpr int ok = 0;
constexpr int usage = 2;
constexpr int io = 3;
constexpr int internal = 4;
}  // namespace exit_code

inline SourceProgram load_program(const std::string& rules_file, const std::string& data_file) {
  SourceProgram prog = parse_file(rules_file);
  if (!data_file.empty()) parse_into(prog, read_file(data_file));
  return prog;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chase engine and termination analyzer for disjunctive existential rules", "chase_sentinel"};
  app.require_subcommand(1);

  ClassifyOptions copt;
  std::string file, data, notion = "default", mode = "rmfa-like", query, dot, csv, trace;
  bool as_json = false, no_guard = false;
  std::size_t max_vertices = 100000, max_depth = 10000;
  unsigned reps = 3;

  auto add_analysis = [&](CLI::App* c) {
    c->add_option("--k", copt.k, "k for the acyclicity check")->check(CLI::PositiveNumber);
    c->add_option("--timeout", copt.timeout, "seconds for the whole analysis (0: none)")->check(CLI::NonNegativeNumber);
    c->add_option("--term-depth", copt.term_depth, "term-depth cap for prefix searches")->check(CLI::PositiveNumber);
    c->add_option("--acyclic-mode", mode, "mfa or rmfa-like")->check(CLI::IsMember({"mfa", "rmfa-like"}));
    c->add_option("--jobs", copt.jobs, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* cls = app.add_subcommand("classify", "classify a rule set as terminating, never-terminating or unknown");
  cls->add_option("FILE", file, "rule file")->required();
  cls->add_option("--notion", notion, "rpcs, rpc, drpc, acyclic or all")
      ->check(CLI::IsMember({"default", "rpcs", "rpc", "drpc", "acyclic", "all"}));
  cls->add_flag("--json", as_json, "JSON report");
  cls->add_flag("--no-injectivity-guard", no_guard, "debug: let the prefix search use non-injective substitutions for rho");
  add_analysis(cls);

  auto* exp = app.add_subcommand("explain", "print a cyclicity witness and its unrolling");
  exp->add_option("FILE", file, "rule file")->required();
  exp->add_option("--notion", notion, "rpcs, rpc or drpc")->check(CLI::IsMember({"default", "rpcs", "rpc", "drpc"}));
  exp->add_option("--reps", reps, "repetitions to unroll")->check(CLI::PositiveNumber);
  exp->add_flag("--json", as_json, "JSON witness");
  exp->add_flag("--no-injectivity-guard", no_guard, "debug: disable the injectivity condition");
  add_analysis(exp);

  auto* ch = app.add_subcommand("chase", "run the restricted disjunctive chase");
  ch->add_option("RULES", file, "rule file (may contain facts)")->required();
  ch->add_option("DATA", data, "fact file");
  ch->add_option("--max-vertices", max_vertices)->check(CLI::PositiveNumber);
  ch->add_option("--max-depth", max_depth)->check(CLI::PositiveNumber);
  ch->add_option("--dot", dot, "write the chase tree as graphviz");
  ch->add_option("--trace", trace, "write the chase tree as a line trace");

  auto* ent = app.add_subcommand("entails", "decide entailment of a boolean conjunctive query");
  ent->add_option("RULES", file, "rule file")->required();
  ent->add_option("DATA", data, "fact file");
  ent->add_option("--query", query, "query, e.g. \"Spare(d)\"; defaults to the first query in the files");
  ent->add_option("--max-vertices", max_vertices)->check(CLI::PositiveNumber);
  ent->add_option("--max-depth", max_depth)->check(CLI::PositiveNumber);

  auto* bat = app.add_subcommand("batch", "classify every .drls file in a directory");
  bat->add_option("DIR", file, "directory")->required();
  bat->add_option("--csv", csv, "write per-file rows as CSV");
  add_analysis(bat);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_code::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  }

  copt.acyclic_mode = mode == "mfa" ? AcyclicityMode::MFA : AcyclicityMode::RmfaLike;
  copt.injectivity_guard = !no_guard;
  if (notion == "all") {
    copt.notions = {"acyclic", "drpc", "rpcs", "rpc"};
    copt.run_all = true;
  } else if (notion != "default") {
    copt.notions = {notion};
  }

  try {
    if (*cls) {
      auto prog = parse_file(file);
      auto rep = classify(prog.rules, copt, file);
      if (as_json)
        out << report_json(rep).dump(2) << "\n";
      else
        out << report_text(prog.rules, rep);
      return exit_code::ok;
    }

    if (*exp) {
      auto prog = parse_file(file);
      if (copt.notions.empty()) copt.notions = {"drpc", "rpcs"};
      auto rep = classify(prog.rules, copt, file);
      const Verdict* hit = nullptr;
      for (const auto& v : rep.cyclicity)
        if (v.witness) hit = &v;
      if (!hit) {
        out << "no cyclicity witness";
        for (const auto& v : rep.cyclicity) out << "; " << to_string(v.notion) << ": " << to_string(v.result);
        out << "\n";
        return exit_code::ok;
      }
      auto seq = unroll_prefix(*hit->witness, reps);
      if (as_json) {
        json j = witness_json(*hit->witness);
        j["schema"] = 1;
        j["notion"] = to_string(hit->notion);
        json u = json::array();
        for (const auto& t : seq) u.push_back({{"rule", t.rule->id()}, {"substitution", substitution_json(t.sigma, *t.rule)}});
        j["unrolled"] = u;
        out << j.dump(2) << "\n";
        return exit_code::ok;
      }
      Printer p(&prog.rules);
      out << to_string(hit->notion) << " witness\n" << witness_text(prog.rules, *hit->witness);
      out << "  unrolled x" << reps << " (" << seq.size() << " triggers):\n";
      for (const auto& t : seq) out << "    " << p.trigger(t) << "\n";
      return exit_code::ok;
    }

    if (*ch || *ent) {
      auto prog = load_program(file, data);
      FactSet db;
      db.insert_all(prog.facts);
      ChaseBudget b;
      b.max_vertices = max_vertices;
      b.max_depth = max_depth;
      if (*ent) {
        std::vector<Atom> q;
        if (!query.empty())
          q = parse_query(query, &prog).atoms;
        else if (!prog.queries.empty())
          q = prog.queries.front().atoms;
        else
          throw CLI::ValidationError("--query", "no query given");
        out << to_string(entails(prog.rules, db, q, b)) << "\n";
        return exit_code::ok;
      }
      auto tree = run_chase(prog.rules, db, b);
      auto write = [&](const std::string& path, const std::string& text) {
        std::ofstream f(path);
        if (!f) throw IoError("cannot write " + path);
        f << text;
      };
      if (!dot.empty()) write(dot, export_dot(tree, &prog.rules));
      if (!trace.empty()) write(trace, export_trace(tree, &prog.rules));
      if (tree.status != ChaseStatus::Complete) {
        out << "budget-exhausted after " << tree.size() << " vertices\n";
        return exit_code::ok;
      }
      Printer p(&prog.rules);
      auto rs = results(tree);
      out << rs.size() << " result" << (rs.size() == 1 ? "" : "s") << "\n";
      for (const auto& r : rs) out << p.facts(r) << "\n";
      return exit_code::ok;
    }

    if (*bat) {
      namespace fs = std::filesystem;
      std::error_code ec;
      if (!fs::is_directory(file, ec)) throw IoError("not a directory: " + file);
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(file, ec))
        if (e.is_regular_file() && e.path().extension() == ".drls") files.push_back(e.path());
      if (ec) throw IoError("cannot list " + file);
      std::sort(files.begin(), files.end());
      auto rows = run_batch(files, copt, copt.jobs);
      for (const auto& r : rows) {
        out << std::left << std::setw(32) << r.file << " ";
        if (!r.error.empty())
          out << "error: " << r.error << "\n";
        else
          out << std::setw(12) << r.bucket << " acyclic=" << r.acyclic << " drpc=" << r.drpc << " rpcs=" << r.rpcs
              << " -> " << r.combined << "\n";
      }
      out << "\n" << batch_summary(rows);
      if (!csv.empty()) {
        std::ofstream f(csv);
        if (!f) throw IoError("cannot write " + csv);
        f << batch_csv(rows);
      }
      bool any = files.empty() || std::any_of(rows.begin(), rows.end(), [](const BatchRow& r) { return r.error.empty(); });
      return any ? exit_code::ok : exit_code::usage;
    }
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return exit_code::usage;
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return exit_code::io;
  } catch (const SoundnessViolation& e) {
    err << "internal soundness violation: " << e.what() << "\n";
    return exit_code::internal;
  } catch (const InternalInconsistency& e) {
    err << "internal inconsistency: " << e.what() << "\n";
    return exit_code::internal;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  }
  return exit_code::usage;
}

}  // namespace sentinel
