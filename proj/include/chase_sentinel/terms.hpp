#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sentinel {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void hash_mix(std::size_t& seed, std::size_t v) {
  seed ^= v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
}

namespace detail {

// Append-only storage with stable addresses. Writers serialize through the
// owner's mutex; readers never lock.
template <class T>
class Arena {
 public:
  static constexpr uint32_t kChunkBits = 12;
  static constexpr uint32_t kChunkSize = 1u << kChunkBits;
  static constexpr uint32_t kMaxChunks = 1u << 16;

  Arena() : chunks_(new std::atomic<T*>[kMaxChunks]) {
    for (uint32_t i = 0; i < kMaxChunks; ++i) chunks_[i].store(nullptr, std::memory_order_relaxed);
  }
  ~Arena() {
    for (uint32_t i = 0; i < kMaxChunks; ++i) delete[] chunks_[i].load(std::memory_order_relaxed);
  }
  Arena(const Arena&) = delete;
  Arena& operator=(const Arena&) = delete;

  uint32_t push(T value) {
    uint32_t idx = size_;
    uint32_t c = idx >> kChunkBits;
    if (c >= kMaxChunks) throw Error("intern table full");
    T* chunk = chunks_[c].load(std::memory_order_relaxed);
    if (!chunk) {
      chunk = new T[kChunkSize];
      chunks_[c].store(chunk, std::memory_order_release);
    }
    chunk[idx & (kChunkSize - 1)] = std::move(value);
    ++size_;
    return idx;
  }

  const T& operator[](uint32_t i) const {
    return chunks_[i >> kChunkBits].load(std::memory_order_acquire)[i & (kChunkSize - 1)];
  }

  uint32_t size() const { return size_; }

 private:
  std::unique_ptr<std::atomic<T*>[]> chunks_;
  uint32_t size_ = 0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Interned names

using Symbol = uint32_t;

class SymbolTable {
 public:
  static SymbolTable& global() {
    static SymbolTable table;
    return table;
  }

  Symbol intern(std::string_view name) {
    std::lock_guard lock(mutex_);
    auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    Symbol s = names_.push(std::string(name));
    index_.emplace(std::string(name), s);
    return s;
  }

  const std::string& name(Symbol s) const { return names_[s]; }

 private:
  std::mutex mutex_;
  detail::Arena<std::string> names_;
  std::unordered_map<std::string, Symbol> index_;
};

inline Symbol intern(std::string_view name) { return SymbolTable::global().intern(name); }
inline const std::string& symbol_name(Symbol s) { return SymbolTable::global().name(s); }

// ---------------------------------------------------------------------------
// Skolem symbols: one per (rule id, disjunct, existential variable)

using SkolemId = uint32_t;

struct SkolemSymbol {
  std::string rule_id;
  uint32_t disjunct = 0;  // 1-based
  Symbol variable = 0;

  bool operator==(const SkolemSymbol&) const = default;
};

class SkolemTable {
 public:
  static SkolemTable& global() {
    static SkolemTable table;
    return table;
  }

  SkolemId intern(const SkolemSymbol& s) {
    std::lock_guard lock(mutex_);
    std::string key = s.rule_id + '\x1f' + std::to_string(s.disjunct) + '\x1f' + std::to_string(s.variable);
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    SkolemId id = symbols_.push(s);
    index_.emplace(std::move(key), id);
    return id;
  }

  const SkolemSymbol& get(SkolemId id) const { return symbols_[id]; }

 private:
  std::mutex mutex_;
  detail::Arena<SkolemSymbol> symbols_;
  std::unordered_map<std::string, SkolemId> index_;
};

inline SkolemId skolem_symbol(const std::string& rule_id, uint32_t disjunct, Symbol variable) {
  return SkolemTable::global().intern({rule_id, disjunct, variable});
}
inline const SkolemSymbol& skolem_info(SkolemId f) { return SkolemTable::global().get(f); }

inline std::string skolem_name(SkolemId f) {
  const auto& s = skolem_info(f);
  return "f_" + s.rule_id + "_" + std::to_string(s.disjunct) + "_" + symbol_name(s.variable);
}

// ---------------------------------------------------------------------------
// Hash-consed terms

enum class TermKind : uint8_t { Constant, Variable, Functional };

class Term;

namespace detail {

struct TermNode {
  TermKind kind = TermKind::Constant;
  uint32_t symbol = 0;  // Symbol for constants/variables, SkolemId for functional terms
  std::vector<uint32_t> args;
  uint32_t depth = 1;
  bool ground = true;
  bool cyclic = false;
  uint32_t max_repeat = 0;  // most occurrences of one function symbol on a root-to-leaf path
  // (function symbol, most occurrences on any path), sorted by symbol
  std::vector<std::pair<uint32_t, uint32_t>> path_counts;
};

struct TermKey {
  TermKind kind;
  uint32_t symbol;
  std::vector<uint32_t> args;
  bool operator==(const TermKey&) const = default;
};

struct TermKeyHash {
  std::size_t operator()(const TermKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.kind) * 31 + k.symbol;
    for (auto a : k.args) hash_mix(h, a);
    return h;
  }
};

class TermStore {
 public:
  static TermStore& global() {
    static TermStore store;
    return store;
  }

  uint32_t intern(TermKind kind, uint32_t symbol, std::vector<uint32_t> args) {
    TermKey key{kind, symbol, std::move(args)};
    std::size_t h = TermKeyHash{}(key);
    Shard& shard = shards_[h % kShards];
    std::lock_guard lock(shard.mutex);
    auto it = shard.map.find(key);
    if (it != shard.map.end()) return it->second;
    TermNode node = make_node(key);
    uint32_t id;
    {
      std::lock_guard alock(arena_mutex_);
      id = nodes_.push(std::move(node));
    }
    shard.map.emplace(std::move(key), id);
    return id;
  }

  const TermNode& node(uint32_t id) const { return nodes_[id]; }

  uint32_t size() {
    std::lock_guard alock(arena_mutex_);
    return nodes_.size();
  }

 private:
  static constexpr std::size_t kShards = 32;
  struct Shard {
    std::mutex mutex;
    std::unordered_map<TermKey, uint32_t, TermKeyHash> map;
  };

  TermNode make_node(const TermKey& key) const {
    TermNode n;
    n.kind = key.kind;
    n.symbol = key.symbol;
    n.args = key.args;
    if (key.kind == TermKind::Variable) n.ground = false;
    if (key.kind != TermKind::Functional) return n;
    uint32_t f = key.symbol;
    std::vector<std::pair<uint32_t, uint32_t>> counts;
    uint32_t depth = 0;
    for (auto a : key.args) {
      const TermNode& c = nodes_[a];
      depth = std::max(depth, c.depth);
      n.ground = n.ground && c.ground;
      n.cyclic = n.cyclic || c.cyclic;
      n.max_repeat = std::max(n.max_repeat, c.max_repeat);
      for (auto [sym, cnt] : c.path_counts) {
        auto it = std::lower_bound(counts.begin(), counts.end(), std::make_pair(sym, 0u));
        if (it != counts.end() && it->first == sym)
          it->second = std::max(it->second, cnt);
        else
          counts.insert(it, {sym, cnt});
      }
    }
    auto it = std::lower_bound(counts.begin(), counts.end(), std::make_pair(f, 0u));
    if (it != counts.end() && it->first == f) {
      n.cyclic = true;
      it->second += 1;
    } else {
      it = counts.insert(it, {f, 1});
    }
    n.max_repeat = std::max(n.max_repeat, it->second);
    n.path_counts = std::move(counts);
    n.depth = depth + 1;
    return n;
  }

  Shard shards_[kShards];
  std::mutex arena_mutex_;
  detail::Arena<TermNode> nodes_;
};

}  // namespace detail

class Term {
 public:
  Term() = default;

  static Term constant(std::string_view name) { return constant(intern(name)); }
  static Term constant(Symbol s) { return Term(detail::TermStore::global().intern(TermKind::Constant, s, {})); }
  static Term variable(std::string_view name) { return variable(intern(name)); }
  static Term variable(Symbol s) { return Term(detail::TermStore::global().intern(TermKind::Variable, s, {})); }
  static Term functional(SkolemId f, const std::vector<Term>& args) {
    if (args.empty()) throw Error("functional term needs at least one argument");
    std::vector<uint32_t> ids;
    ids.reserve(args.size());
    for (auto a : args) ids.push_back(a.id_);
    return Term(detail::TermStore::global().intern(TermKind::Functional, f, std::move(ids)));
  }

  static Term from_id(uint32_t id) { return Term(id); }

  bool valid() const { return id_ != kInvalid; }
  uint32_t id() const { return id_; }
  TermKind kind() const { return node().kind; }
  bool is_constant() const { return kind() == TermKind::Constant; }
  bool is_variable() const { return kind() == TermKind::Variable; }
  bool is_functional() const { return kind() == TermKind::Functional; }
  Symbol symbol() const { return node().symbol; }
  const std::string& name() const { return symbol_name(node().symbol); }
  SkolemId function() const { return node().symbol; }
  std::size_t arity() const { return node().args.size(); }
  Term arg(std::size_t i) const { return Term(node().args[i]); }
  std::vector<Term> args() const {
    std::vector<Term> out;
    for (auto a : node().args) out.push_back(Term(a));
    return out;
  }
  uint32_t depth() const { return node().depth; }
  bool ground() const { return node().ground; }

  friend bool operator==(Term a, Term b) { return a.id_ == b.id_; }
  friend bool operator!=(Term a, Term b) { return a.id_ != b.id_; }
  friend bool operator<(Term a, Term b) { return a.id_ < b.id_; }

  const detail::TermNode& node() const { return detail::TermStore::global().node(id_); }

 private:
  static constexpr uint32_t kInvalid = 0xffffffffu;
  explicit Term(uint32_t id) : id_(id) {}
  uint32_t id_ = kInvalid;
};

struct TermHash {
  std::size_t operator()(Term t) const { return std::hash<uint32_t>{}(t.id()); }
};

using TermSet = std::unordered_set<Term, TermHash>;

// ---------------------------------------------------------------------------
// Reserved constants. User input may not start an identifier with '_'.

inline constexpr std::string_view kStarName = "__star";
inline constexpr std::string_view kUcPrefix = "__uc_";
inline constexpr std::string_view kDbPrefix = "__db_";
inline constexpr std::string_view kGenPrefix = "__gen_";

inline Term star() {
  static const Term t = Term::constant(kStarName);
  return t;
}
inline Term uc_constant(SkolemId f) { return Term::constant(std::string(kUcPrefix) + skolem_name(f)); }
inline Term db_constant(Term var) { return Term::constant(std::string(kDbPrefix) + var.name()); }

inline bool is_reserved_name(std::string_view name) { return !name.empty() && name[0] == '_'; }
inline bool is_star(Term t) { return t == star(); }
inline bool is_uc_constant(Term t) { return t.is_constant() && t.name().rfind(kUcPrefix, 0) == 0; }
inline bool is_db_constant(Term t) { return t.is_constant() && t.name().rfind(kDbPrefix, 0) == 0; }

// ---------------------------------------------------------------------------
// Term measures

inline uint32_t term_depth(Term t) { return t.depth(); }

inline bool is_cyclic(Term t) { return t.node().cyclic; }

inline bool is_k_cyclic(Term t, uint32_t k) {
  if (k == 0) throw Error("k must be positive");
  return t.node().max_repeat >= k + 1;
}

inline bool occurs_function(Term t, SkolemId f) {
  const auto& pc = t.node().path_counts;
  auto it = std::lower_bound(pc.begin(), pc.end(), std::make_pair(f, 0u));
  return it != pc.end() && it->first == f;
}

inline void collect_subterms(Term t, TermSet& out) {
  if (!out.insert(t).second) return;
  if (t.is_functional())
    for (std::size_t i = 0; i < t.arity(); ++i) collect_subterms(t.arg(i), out);
}

inline bool is_subterm(Term needle, Term hay) {
  if (needle == hay) return true;
  if (!hay.is_functional() || hay.depth() <= needle.depth()) return false;
  for (std::size_t i = 0; i < hay.arity(); ++i)
    if (is_subterm(needle, hay.arg(i))) return true;
  return false;
}

inline void collect_constants(Term t, std::vector<Term>& out) {
  if (t.is_constant()) {
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  } else if (t.is_functional()) {
    for (std::size_t i = 0; i < t.arity(); ++i) collect_constants(t.arg(i), out);
  }
}

inline std::string to_string(Term t) {
  if (!t.is_functional()) return t.name();
  std::string s = skolem_name(t.function()) + "(";
  for (std::size_t i = 0; i < t.arity(); ++i) {
    if (i) s += ",";
    s += to_string(t.arg(i));
  }
  return s + ")";
}

// Structural order, independent of interning order.
inline int compare_terms(Term a, Term b) {
  if (a == b) return 0;
  if (a.kind() != b.kind()) return static_cast<int>(a.kind()) < static_cast<int>(b.kind()) ? -1 : 1;
  if (!a.is_functional()) return a.name() < b.name() ? -1 : 1;
  if (a.function() != b.function()) {
    std::string na = skolem_name(a.function()), nb = skolem_name(b.function());
    if (na != nb) return na < nb ? -1 : 1;
  }
  if (a.arity() != b.arity()) return a.arity() < b.arity() ? -1 : 1;
  for (std::size_t i = 0; i < a.arity(); ++i)
    if (int c = compare_terms(a.arg(i), b.arg(i))) return c;
  return 0;
}

// ---------------------------------------------------------------------------
// Predicates and atoms

using PredId = uint32_t;

class PredicateTable {
 public:
  static PredicateTable& global() {
    static PredicateTable table;
    return table;
  }
  PredId intern(std::string_view name, uint32_t arity) {
    std::lock_guard lock(mutex_);
    std::string key = std::string(name) + '/' + std::to_string(arity);
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    PredId id = preds_.push({std::string(name), arity});
    index_.emplace(std::move(key), id);
    return id;
  }
  const std::string& name(PredId p) const { return preds_[p].first; }
  uint32_t arity(PredId p) const { return preds_[p].second; }

 private:
  std::mutex mutex_;
  detail::Arena<std::pair<std::string, uint32_t>> preds_;
  std::unordered_map<std::string, PredId> index_;
};

inline PredId predicate(std::string_view name, uint32_t arity) {
  return PredicateTable::global().intern(name, arity);
}
inline const std::string& predicate_name(PredId p) { return PredicateTable::global().name(p); }
inline uint32_t predicate_arity(PredId p) { return PredicateTable::global().arity(p); }

struct Atom {
  PredId pred = 0;
  std::vector<Term> args;

  Atom() = default;
  Atom(PredId p, std::vector<Term> a) : pred(p), args(std::move(a)) {
    if (args.size() != predicate_arity(pred)) throw Error("arity mismatch for " + predicate_name(pred));
  }
  Atom(std::string_view name, std::vector<Term> a) : pred(predicate(name, static_cast<uint32_t>(a.size()))), args(std::move(a)) {}

  bool ground() const {
    return std::all_of(args.begin(), args.end(), [](Term t) { return t.ground(); });
  }
  friend bool operator==(const Atom& a, const Atom& b) { return a.pred == b.pred && a.args == b.args; }
  friend bool operator<(const Atom& a, const Atom& b) {
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.args < b.args;
  }
};

struct AtomHash {
  std::size_t operator()(const Atom& a) const {
    std::size_t h = a.pred;
    for (auto t : a.args) hash_mix(h, t.id());
    return h;
  }
};

inline std::string to_string(const Atom& a) {
  std::string s = predicate_name(a.pred) + "(";
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (i) s += ",";
    s += to_string(a.args[i]);
  }
  return s + ")";
}

inline void collect_variables(const std::vector<Atom>& atoms, std::vector<Term>& out) {
  for (const auto& a : atoms)
    for (auto t : a.args)
      if (t.is_variable() && std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
}

// ---------------------------------------------------------------------------
// Substitutions and constant mappings

namespace detail {

// Small sorted map keyed by term id.
class TermMap {
 public:
  using Entry = std::pair<Term, Term>;

  std::optional<Term> get(Term k) const {
    auto it = find(k);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(Term k) const { return find(k) != entries_.end(); }
  void set(Term k, Term v) {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), k,
                               [](const Entry& e, Term key) { return e.first < key; });
    if (it != entries_.end() && it->first == k)
      it->second = v;
    else
      entries_.insert(it, {k, v});
  }
  void erase(Term k) {
    auto it = find(k);
    if (it != entries_.end()) entries_.erase(it);
  }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  friend bool operator==(const TermMap& a, const TermMap& b) { return a.entries_ == b.entries_; }
  std::size_t hash() const {
    std::size_t h = entries_.size();
    for (auto& [k, v] : entries_) {
      hash_mix(h, k.id());
      hash_mix(h, v.id());
    }
    return h;
  }

 private:
  std::vector<Entry>::const_iterator find(Term k) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), k,
                               [](const Entry& e, Term key) { return e.first < key; });
    if (it != entries_.end() && it->first == k) return it;
    return entries_.end();
  }
  std::vector<Entry> entries_;
};

}  // namespace detail

class Substitution : public detail::TermMap {
 public:
  Substitution() = default;
  Substitution(std::initializer_list<std::pair<Term, Term>> init) {
    for (auto& [k, v] : init) bind(k, v);
  }

  void bind(Term var, Term value) {
    if (!var.is_variable()) throw Error("substitution domain must be variables");
    set(var, value);
  }

  Term apply(Term t) const {
    switch (t.kind()) {
      case TermKind::Variable: {
        auto v = get(t);
        return v ? *v : t;
      }
      case TermKind::Constant:
        return t;
      case TermKind::Functional: {
        if (t.ground()) return t;
        std::vector<Term> args;
        for (std::size_t i = 0; i < t.arity(); ++i) args.push_back(apply(t.arg(i)));
        return Term::functional(t.function(), args);
      }
    }
    return t;
  }
  Term operator()(Term t) const { return apply(t); }

  Atom apply(const Atom& a) const {
    Atom out;
    out.pred = a.pred;
    out.args.reserve(a.args.size());
    for (auto t : a.args) out.args.push_back(apply(t));
    return out;
  }

  std::vector<Atom> apply(const std::vector<Atom>& atoms) const {
    std::vector<Atom> out;
    out.reserve(atoms.size());
    for (const auto& a : atoms) out.push_back(apply(a));
    return out;
  }

  bool injective() const {
    std::vector<uint32_t> seen;
    for (auto& [k, v] : *this) seen.push_back(v.id());
    std::sort(seen.begin(), seen.end());
    return std::adjacent_find(seen.begin(), seen.end()) == seen.end();
  }

  Substitution restricted(const std::vector<Term>& vars) const {
    Substitution out;
    for (auto v : vars)
      if (auto t = get(v)) out.bind(v, *t);
    return out;
  }
};

struct SubstitutionHash {
  std::size_t operator()(const Substitution& s) const { return s.hash(); }
};

class ConstantMapping : public detail::TermMap {
 public:
  ConstantMapping() = default;
  ConstantMapping(std::initializer_list<std::pair<Term, Term>> init) {
    for (auto& [k, v] : init) map(k, v);
  }

  void map(Term c, Term value) {
    if (!c.is_constant()) throw Error("constant mapping domain must be constants");
    set(c, value);
  }

  // Replaces every occurrence of a mapped constant.
  Term apply(Term t) const {
    switch (t.kind()) {
      case TermKind::Constant: {
        auto v = get(t);
        return v ? *v : t;
      }
      case TermKind::Variable:
        return t;
      case TermKind::Functional: {
        std::vector<Term> args;
        bool changed = false;
        for (std::size_t i = 0; i < t.arity(); ++i) {
          args.push_back(apply(t.arg(i)));
          changed = changed || args.back() != t.arg(i);
        }
        return changed ? Term::functional(t.function(), args) : t;
      }
    }
    return t;
  }
  Term operator()(Term t) const { return apply(t); }

  Atom apply(const Atom& a) const {
    Atom out;
    out.pred = a.pred;
    for (auto t : a.args) out.args.push_back(apply(t));
    return out;
  }

  // g ∘ σ
  Substitution after(const Substitution& sigma) const {
    Substitution out;
    for (auto& [v, t] : sigma) out.bind(v, apply(t));
    return out;
  }

  // g^n as a mapping (g applied n times)
  ConstantMapping power(unsigned n) const {
    ConstantMapping out;
    for (auto& [c, t] : *this) {
      Term cur = c;
      for (unsigned i = 0; i < n; ++i) cur = apply(cur);
      out.map(c, cur);
    }
    return out;
  }
};

}  // namespace sentinel
