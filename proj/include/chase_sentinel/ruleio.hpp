#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "model.hpp"

namespace sentinel {

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& msg)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_, column_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

struct Query {
  std::vector<Atom> atoms;
  std::vector<Term> existentials;
};

struct SourceProgram {
  RuleSet rules;
  std::vector<Atom> facts;
  std::vector<Query> queries;
};

namespace detail {

enum class Tok { Ident, LParen, RParen, Comma, Dot, Arrow, Bar, Question, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t line, col;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip();
    Token t{Tok::End, "", line_, col_};
    if (pos_ >= src_.size()) return t;
    char c = src_[pos_];
    auto single = [&](Tok k) {
      t.kind = k;
      t.text = std::string(1, c);
      advance();
      return t;
    };
    switch (c) {
      case '(': return single(Tok::LParen);
      case ')': return single(Tok::RParen);
      case ',': return single(Tok::Comma);
      case '.': return single(Tok::Dot);
      case '|': return single(Tok::Bar);
      case '?': return single(Tok::Question);
      case '-':
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
          advance();
          advance();
          t.kind = Tok::Arrow;
          t.text = "->";
          return t;
        }
        break;
      default:
        break;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        advance();
      t.kind = Tok::Ident;
      t.text = std::string(src_.substr(start, pos_ - start));
      return t;
    }
    throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '%') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0, line_ = 1, col_ = 1;
};

struct RawTerm {
  std::string name;
  std::size_t line, col;
  bool variable() const { return std::isupper(static_cast<unsigned char>(name[0])); }
};

struct RawAtom {
  std::string pred;
  std::vector<RawTerm> args;
  std::size_t line, col;
};

class Parser {
 public:
  Parser(std::string_view src, SourceProgram& prog) : lex_(src), prog_(prog) {
    for (const auto& r : prog.rules) {
      for (const auto& a : r.body()) arity_[predicate_name(a.pred)] = predicate_arity(a.pred);
      for (const auto& h : r.heads())
        for (const auto& a : h.atoms) arity_[predicate_name(a.pred)] = predicate_arity(a.pred);
    }
    for (const auto& a : prog.facts) arity_[predicate_name(a.pred)] = predicate_arity(a.pred);
    for (const auto& q : prog.queries)
      for (const auto& a : q.atoms) arity_[predicate_name(a.pred)] = predicate_arity(a.pred);
    next_rule_ = prog.rules.size() + 1;
    cur_ = lex_.next();
  }

  void program() {
    while (cur_.kind != Tok::End) {
      if (cur_.kind == Tok::Question) {
        shift();
        auto body = conjunction();
        expect(Tok::Dot, "'.'");
        prog_.queries.push_back(make_query(body));
        continue;
      }
      Token start = cur_;
      auto body = conjunction();
      if (cur_.kind == Tok::Arrow) {
        shift();
        std::vector<std::vector<RawAtom>> heads;
        heads.push_back(conjunction());
        while (cur_.kind == Tok::Bar) {
          shift();
          heads.push_back(conjunction());
        }
        expect(Tok::Dot, "'.'");
        add_rule(start, body, heads);
      } else {
        expect(Tok::Dot, "'->' or '.'");
        for (const auto& a : body) {
          for (const auto& t : a.args)
            if (t.variable()) throw ParseError(t.line, t.col, "facts must be ground, found variable " + t.name);
          prog_.facts.push_back(atom(a, nullptr));
        }
      }
    }
  }

  std::vector<RawAtom> conjunction() {
    std::vector<RawAtom> out;
    out.push_back(raw_atom());
    while (cur_.kind == Tok::Comma) {
      shift();
      out.push_back(raw_atom());
    }
    return out;
  }

  bool at_end() const { return cur_.kind == Tok::End; }
  void expect_end() {
    if (cur_.kind != Tok::End) throw ParseError(cur_.line, cur_.col, "unexpected '" + cur_.text + "'");
  }
  void skip_optional(Tok k) {
    if (cur_.kind == k) shift();
  }

  Query make_query(const std::vector<RawAtom>& body) {
    Query q;
    std::map<std::string, Term> vars;
    for (const auto& a : body) q.atoms.push_back(atom(a, &vars));
    collect_variables(q.atoms, q.existentials);
    return q;
  }

 private:
  void shift() { cur_ = lex_.next(); }

  void expect(Tok k, const char* what) {
    if (cur_.kind != k)
      throw ParseError(cur_.line, cur_.col,
                       std::string("expected ") + what + (cur_.kind == Tok::End ? " at end of input" : ", found '" + cur_.text + "'"));
    shift();
  }

  static void check_name(const std::string& name, std::size_t line, std::size_t col) {
    if (is_reserved_name(name)) throw ParseError(line, col, "identifier '" + name + "' uses the reserved namespace");
  }

  RawAtom raw_atom() {
    if (cur_.kind != Tok::Ident)
      throw ParseError(cur_.line, cur_.col,
                       cur_.kind == Tok::End ? "expected atom at end of input" : "expected atom, found '" + cur_.text + "'");
    RawAtom a{cur_.text, {}, cur_.line, cur_.col};
    check_name(a.pred, a.line, a.col);
    shift();
    expect(Tok::LParen, "'('");
    for (;;) {
      if (cur_.kind != Tok::Ident) throw ParseError(cur_.line, cur_.col, "expected term, found '" + cur_.text + "'");
      check_name(cur_.text, cur_.line, cur_.col);
      a.args.push_back({cur_.text, cur_.line, cur_.col});
      shift();
      if (cur_.kind == Tok::Comma) {
        shift();
        continue;
      }
      expect(Tok::RParen, "',' or ')'");
      break;
    }
    auto it = arity_.find(a.pred);
    if (it == arity_.end())
      arity_[a.pred] = static_cast<uint32_t>(a.args.size());
    else if (it->second != a.args.size())
      throw ParseError(a.line, a.col,
                       "predicate " + a.pred + " used with arity " + std::to_string(a.args.size()) + ", earlier " +
                           std::to_string(it->second));
    return a;
  }

  Atom atom(const RawAtom& a, std::map<std::string, Term>* vars) {
    std::vector<Term> args;
    for (const auto& t : a.args) args.push_back(t.variable() ? Term::variable(t.name) : Term::constant(t.name));
    return Atom(a.pred, std::move(args));
  }

  void add_rule(const Token& start, const std::vector<RawAtom>& body, const std::vector<std::vector<RawAtom>>& heads) {
    auto no_constants = [](const std::vector<RawAtom>& atoms) {
      for (const auto& a : atoms)
        for (const auto& t : a.args)
          if (!t.variable()) throw ParseError(t.line, t.col, "constant " + t.name + " in a rule; rules must be constant-free");
    };
    no_constants(body);
    for (const auto& h : heads) no_constants(h);
    std::vector<Atom> b;
    for (const auto& a : body) b.push_back(atom(a, nullptr));
    std::vector<Term> body_vars;
    collect_variables(b, body_vars);
    std::vector<HeadDisjunct> hs;
    for (const auto& h : heads) {
      HeadDisjunct d;
      for (const auto& a : h) d.atoms.push_back(atom(a, nullptr));
      std::vector<Term> hv;
      collect_variables(d.atoms, hv);
      for (auto v : hv)
        if (std::find(body_vars.begin(), body_vars.end(), v) == body_vars.end()) d.existentials.push_back(v);
      hs.push_back(std::move(d));
    }
    try {
      prog_.rules.add(Rule(std::to_string(next_rule_++), std::move(b), std::move(hs)));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(start.line, start.col, e.what());
    }
  }

  Lexer lex_;
  Token cur_;
  SourceProgram& prog_;
  std::map<std::string, uint32_t> arity_;
  std::size_t next_rule_ = 1;
};

}  // namespace detail

// Appends the contents of `text` to `prog`; rule ids continue from prog's rules.
inline void parse_into(SourceProgram& prog, std::string_view text) {
  detail::Parser p(text, prog);
  p.program();
}

inline SourceProgram parse(std::string_view text) {
  SourceProgram prog;
  parse_into(prog, text);
  return prog;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SourceProgram parse_file(const std::string& path) { return parse(read_file(path)); }

// Accepts "Spare(d)", "Has(X,Y), Engine(Y)" and "? Spare(d)." alike.
inline Query parse_query(std::string_view text, const SourceProgram* context = nullptr) {
  SourceProgram scratch;
  if (context) {
    scratch.facts = context->facts;
    scratch.rules = context->rules;
  }
  detail::Parser p(text, scratch);
  p.skip_optional(detail::Tok::Question);
  auto body = p.conjunction();
  p.skip_optional(detail::Tok::Dot);
  p.expect_end();
  return p.make_query(body);
}

// Reads terms written by to_string, including reserved constants and
// skolem terms f_<rule>_<disjunct>_<var>(...).
inline Term parse_term(std::string_view text) {
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) -> Term { throw ParseError(1, pos + 1, msg); };
  std::function<Term()> term = [&]() -> Term {
    std::size_t start = pos;
    while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) ++pos;
    std::string name(text.substr(start, pos - start));
    if (name.empty()) return fail("expected term");
    if (pos < text.size() && text[pos] == '(') {
      ++pos;
      if (name.rfind("f_", 0) != 0) return fail("functional term must use a skolem symbol");
      std::size_t a = name.find('_', 2);
      std::size_t b = a == std::string::npos ? a : name.find('_', a + 1);
      if (b == std::string::npos) return fail("malformed skolem symbol " + name);
      std::string rule = name.substr(2, a - 2);
      uint32_t disj = static_cast<uint32_t>(std::stoul(name.substr(a + 1, b - a - 1)));
      SkolemId f = skolem_symbol(rule, disj, intern(name.substr(b + 1)));
      std::vector<Term> args;
      for (;;) {
        args.push_back(term());
        if (pos < text.size() && text[pos] == ',') {
          ++pos;
          continue;
        }
        if (pos < text.size() && text[pos] == ')') {
          ++pos;
          break;
        }
        return fail("expected ',' or ')'");
      }
      return Term::functional(f, args);
    }
    if (std::isupper(static_cast<unsigned char>(name[0]))) return Term::variable(name);
    return Term::constant(name);
  };
  Term t = term();
  if (pos != text.size()) fail("trailing input");
  return t;
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string render_atom(const Atom& a) { return to_string(a); }

inline std::string render_conjunction(const std::vector<Atom>& atoms) {
  std::string s;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (i) s += ", ";
    s += render_atom(atoms[i]);
  }
  return s;
}

inline std::string render(const Rule& r) {
  std::string s = render_conjunction(r.body()) + " -> ";
  for (std::size_t i = 0; i < r.heads().size(); ++i) {
    if (i) s += " | ";
    s += render_conjunction(r.heads()[i].atoms);
  }
  return s + ".";
}

inline std::string render(const SourceProgram& p) {
  std::string s;
  for (const auto& r : p.rules) s += render(r) + "\n";
  for (const auto& f : p.facts) s += render_atom(f) + ".\n";
  for (const auto& q : p.queries) s += "? " + render_conjunction(q.atoms) + ".\n";
  return s;
}

inline std::string render(const RuleSet& rules) {
  std::string s;
  for (const auto& r : rules) s += render(r) + "\n";
  return s;
}

// Facts in the input syntax; reserved constants and skolem terms appear
// under their internal names.
inline std::string render_facts(const FactSet& facts) {
  std::string s;
  for (const auto& f : facts) s += render_atom(f) + ".\n";
  return s;
}

}  // namespace sentinel
