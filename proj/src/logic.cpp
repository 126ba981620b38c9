#include "lenkit/logic.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "lenkit/errors.hpp"

namespace lenkit {

namespace {

constexpr std::size_t kMaxEnumerationVars = 20;

void check_capacity(std::size_t k) {
  if (k > kMaxEnumerationVars) {
    throw CapacityError("enumeration over " + std::to_string(k) + " variables exceeds the " +
                        std::to_string(kMaxEnumerationVars) + "-variable cap");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Minterm

void Minterm::set(ConceptId concept_id, bool negated) {
  Literal lit{concept_id, negated};
  auto it = std::lower_bound(literals_.begin(), literals_.end(), Literal{concept_id, false});
  if (it != literals_.end() && it->concept_id == concept_id) {
    if (it->negated != negated) {
      throw DomainError("contradictory literal for concept " + std::to_string(concept_id));
    }
    return;
  }
  literals_.insert(it, lit);
}

bool Minterm::evaluate(const std::vector<bool>& assignment) const {
  for (const Literal& lit : literals_) {
    if (lit.concept_id >= assignment.size()) {
      throw DomainError("concept " + std::to_string(lit.concept_id) +
                        " out of range for assignment of length " +
                        std::to_string(assignment.size()));
    }
    if (assignment[lit.concept_id] == lit.negated) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Formula construction

Formula Formula::constant(bool value) {
  Formula f;
  f.kind_ = FormulaKind::Constant;
  f.value_ = value;
  return f;
}

Formula Formula::var(ConceptId concept_id) {
  Formula f;
  f.kind_ = FormulaKind::Var;
  f.concept_ = concept_id;
  return f;
}

Formula Formula::negation(Formula operand) {
  Formula f;
  f.kind_ = FormulaKind::Not;
  f.children_.push_back(std::move(operand));
  return f;
}

Formula Formula::conjunction(std::vector<Formula> children) {
  if (children.empty()) throw DomainError("conjunction needs at least one child");
  if (children.size() == 1) return std::move(children.front());
  Formula f;
  f.kind_ = FormulaKind::And;
  f.children_ = std::move(children);
  return f;
}

Formula Formula::disjunction(std::vector<Formula> children) {
  if (children.empty()) throw DomainError("disjunction needs at least one child");
  if (children.size() == 1) return std::move(children.front());
  Formula f;
  f.kind_ = FormulaKind::Or;
  f.children_ = std::move(children);
  return f;
}

// ---------------------------------------------------------------------------
// Canonical ordering

namespace {

std::size_t min_concept(const Formula& f) {
  switch (f.kind()) {
    case FormulaKind::Constant:
      return std::numeric_limits<std::size_t>::max();
    case FormulaKind::Var:
      return f.concept_id();
    default: {
      std::size_t best = std::numeric_limits<std::size_t>::max();
      for (const Formula& c : f.children()) best = std::min(best, min_concept(c));
      return best;
    }
  }
}

int kind_rank(FormulaKind k) {
  switch (k) {
    case FormulaKind::Constant: return 0;
    case FormulaKind::Var: return 1;
    case FormulaKind::Not: return 2;
    case FormulaKind::And: return 3;
    case FormulaKind::Or: return 4;
  }
  return 5;
}

int compare_formulas(const Formula& a, const Formula& b) {
  std::size_t ma = min_concept(a);
  std::size_t mb = min_concept(b);
  if (ma != mb) return ma < mb ? -1 : 1;
  int ra = kind_rank(a.kind());
  int rb = kind_rank(b.kind());
  if (ra != rb) return ra < rb ? -1 : 1;
  switch (a.kind()) {
    case FormulaKind::Constant:
      if (a.value() != b.value()) return a.value() < b.value() ? -1 : 1;
      return 0;
    case FormulaKind::Var:
      return 0;  // same min concept
    default: {
      std::size_t n = std::min(a.children().size(), b.children().size());
      for (std::size_t i = 0; i < n; ++i) {
        int c = compare_formulas(a.children()[i], b.children()[i]);
        if (c != 0) return c;
      }
      if (a.children().size() != b.children().size()) {
        return a.children().size() < b.children().size() ? -1 : 1;
      }
      return 0;
    }
  }
}

}  // namespace

bool formula_less(const Formula& a, const Formula& b) { return compare_formulas(a, b) < 0; }

Formula canonical(const Formula& f) {
  switch (f.kind()) {
    case FormulaKind::Constant:
    case FormulaKind::Var:
      return f;
    case FormulaKind::Not:
      return Formula::negation(canonical(f.children().front()));
    case FormulaKind::And:
    case FormulaKind::Or: {
      std::vector<Formula> flat;
      for (const Formula& c : f.children()) {
        Formula cc = canonical(c);
        if (cc.kind() == f.kind()) {
          for (const Formula& g : cc.children()) flat.push_back(g);
        } else {
          flat.push_back(std::move(cc));
        }
      }
      std::stable_sort(flat.begin(), flat.end(), formula_less);
      return f.kind() == FormulaKind::And ? Formula::conjunction(std::move(flat))
                                          : Formula::disjunction(std::move(flat));
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

enum class TokenKind { Ident, True, False, Not, And, Or, LParen, RParen, End };

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t offset;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    skip_space();
    std::size_t start = pos_;
    if (pos_ >= text_.size()) return {TokenKind::End, "", start};

    // Multi-byte logic signs: U+00AC, U+2227, U+2228.
    if (match("\xC2\xAC")) return {TokenKind::Not, "~", start};
    if (match("\xE2\x88\xA7")) return {TokenKind::And, "&", start};
    if (match("\xE2\x88\xA8")) return {TokenKind::Or, "|", start};

    char c = text_[pos_];
    switch (c) {
      case '~': ++pos_; return {TokenKind::Not, "~", start};
      case '&': ++pos_; return {TokenKind::And, "&", start};
      case '|': ++pos_; return {TokenKind::Or, "|", start};
      case '(': ++pos_; return {TokenKind::LParen, "(", start};
      case ')': ++pos_; return {TokenKind::RParen, ")", start};
      default: break;
    }
    if (is_ident_start(c)) {
      std::size_t begin = pos_;
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
      std::string word(text_.substr(begin, pos_ - begin));
      if (word == "True") return {TokenKind::True, word, start};
      if (word == "False") return {TokenKind::False, word, start};
      return {TokenKind::Ident, word, start};
    }
    throw ParseError(std::string("unexpected character '") + c + "'", start);
  }

 private:
  static bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }
  static bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

  void skip_space() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
            text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool match(std::string_view s) {
    if (text_.substr(pos_, s.size()) == s) {
      pos_ += s.size();
      return true;
    }
    return false;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& names)
      : lexer_(text), names_(names) {
    advance();
  }

  Formula parse_formula() {
    Formula f = parse_or();
    if (current_.kind != TokenKind::End) {
      throw ParseError("unexpected token '" + current_.text + "'", current_.offset);
    }
    return f;
  }

 private:
  void advance() { current_ = lexer_.next(); }

  Formula parse_or() {
    std::vector<Formula> terms;
    terms.push_back(parse_and());
    while (current_.kind == TokenKind::Or) {
      advance();
      terms.push_back(parse_and());
    }
    return Formula::disjunction(std::move(terms));
  }

  Formula parse_and() {
    std::vector<Formula> terms;
    terms.push_back(parse_unary());
    while (current_.kind == TokenKind::And) {
      advance();
      terms.push_back(parse_unary());
    }
    return Formula::conjunction(std::move(terms));
  }

  Formula parse_unary() {
    if (current_.kind == TokenKind::Not) {
      advance();
      return Formula::negation(parse_unary());
    }
    return parse_atom();
  }

  Formula parse_atom() {
    switch (current_.kind) {
      case TokenKind::True:
        advance();
        return Formula::constant(true);
      case TokenKind::False:
        advance();
        return Formula::constant(false);
      case TokenKind::Ident: {
        auto it = std::find(names_.begin(), names_.end(), current_.text);
        if (it == names_.end()) {
          throw ParseError("unknown identifier '" + current_.text + "'", current_.offset);
        }
        Formula f = Formula::var(static_cast<ConceptId>(it - names_.begin()));
        advance();
        return f;
      }
      case TokenKind::LParen: {
        advance();
        Formula f = parse_or();
        if (current_.kind != TokenKind::RParen) {
          throw ParseError("expected ')'", current_.offset);
        }
        advance();
        return f;
      }
      case TokenKind::End:
        throw ParseError("unexpected end of input", current_.offset);
      default:
        throw ParseError("unexpected token '" + current_.text + "'", current_.offset);
    }
  }

  Lexer lexer_;
  const std::vector<std::string>& names_;
  Token current_;
};

}  // namespace

Formula parse(std::string_view text, const std::vector<std::string>& names) {
  return Parser(text, names).parse_formula();
}

// ---------------------------------------------------------------------------
// Printing

namespace {

void print_node(const Formula& f, const std::vector<std::string>& names, std::string& out) {
  switch (f.kind()) {
    case FormulaKind::Constant:
      out += f.value() ? "True" : "False";
      return;
    case FormulaKind::Var:
      if (f.concept_id() >= names.size()) {
        throw DomainError("concept " + std::to_string(f.concept_id()) +
                          " has no name in a table of size " + std::to_string(names.size()));
      }
      out += names[f.concept_id()];
      return;
    case FormulaKind::Not: {
      const Formula& child = f.children().front();
      out += '~';
      bool atom = child.kind() == FormulaKind::Var || child.kind() == FormulaKind::Constant ||
                  child.kind() == FormulaKind::Not;
      if (!atom) out += '(';
      print_node(child, names, out);
      if (!atom) out += ')';
      return;
    }
    case FormulaKind::And: {
      bool first = true;
      for (const Formula& child : f.children()) {
        if (!first) out += " & ";
        first = false;
        bool wrap = child.kind() == FormulaKind::Or;
        if (wrap) out += '(';
        print_node(child, names, out);
        if (wrap) out += ')';
      }
      return;
    }
    case FormulaKind::Or: {
      bool first = true;
      for (const Formula& child : f.children()) {
        if (!first) out += " | ";
        first = false;
        bool wrap = child.kind() == FormulaKind::And;
        if (wrap) out += '(';
        print_node(child, names, out);
        if (wrap) out += ')';
      }
      return;
    }
  }
}

}  // namespace

std::string format(const Formula& f, const std::vector<std::string>& names) {
  std::string out;
  print_node(canonical(f), names, out);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation and enumeration

bool evaluate(const Formula& f, const std::vector<bool>& assignment) {
  switch (f.kind()) {
    case FormulaKind::Constant:
      return f.value();
    case FormulaKind::Var:
      if (f.concept_id() >= assignment.size()) {
        throw DomainError("concept " + std::to_string(f.concept_id()) +
                          " out of range for assignment of length " +
                          std::to_string(assignment.size()));
      }
      return assignment[f.concept_id()];
    case FormulaKind::Not:
      return !evaluate(f.children().front(), assignment);
    case FormulaKind::And:
      for (const Formula& c : f.children()) {
        if (!evaluate(c, assignment)) return false;
      }
      return true;
    case FormulaKind::Or:
      for (const Formula& c : f.children()) {
        if (evaluate(c, assignment)) return true;
      }
      return false;
  }
  return false;
}

std::vector<std::uint32_t> minterms_of(const Formula& f, std::size_t k) {
  check_capacity(k);
  std::vector<std::uint32_t> result;
  std::vector<bool> assignment(k, false);
  const std::uint32_t limit = static_cast<std::uint32_t>(1u << k);
  for (std::uint32_t m = 0; m < limit; ++m) {
    for (std::size_t j = 0; j < k; ++j) assignment[j] = (m >> j) & 1u;
    if (evaluate(f, assignment)) result.push_back(m);
  }
  return result;
}

bool equivalent(const Formula& f, const Formula& g, std::size_t k) {
  check_capacity(k);
  std::vector<bool> assignment(k, false);
  const std::uint32_t limit = static_cast<std::uint32_t>(1u << k);
  for (std::uint32_t m = 0; m < limit; ++m) {
    for (std::size_t j = 0; j < k; ++j) assignment[j] = (m >> j) & 1u;
    if (evaluate(f, assignment) != evaluate(g, assignment)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Quine-McCluskey minimization

namespace {

// A product term: `bits` holds the values of the variables selected by
// `mask`; cleared mask bits are don't-care positions inside the term.
struct Implicant {
  std::uint32_t bits;
  std::uint32_t mask;

  bool covers(std::uint32_t m) const { return (m & mask) == bits; }
  int literal_count() const { return std::popcount(mask); }

  bool operator==(const Implicant&) const = default;
};

struct ImplicantHash {
  std::size_t operator()(const Implicant& t) const {
    return std::hash<std::uint64_t>()((std::uint64_t(t.mask) << 32) | t.bits);
  }
};

// Literal-sequence order: by concept index ascending, positive before
// negated, a present literal before an absent one.
bool implicant_lex_less(const Implicant& a, const Implicant& b, std::size_t k) {
  for (std::size_t j = 0; j < k; ++j) {
    const std::uint32_t bit = 1u << j;
    int ca = (a.mask & bit) ? ((a.bits & bit) ? 0 : 1) : 2;
    int cb = (b.mask & bit) ? ((b.bits & bit) ? 0 : 1) : 2;
    if (ca != cb) return ca < cb;
  }
  return false;
}

Formula implicant_to_formula(const Implicant& t, std::size_t k) {
  std::vector<Formula> literals;
  for (std::size_t j = 0; j < k; ++j) {
    const std::uint32_t bit = 1u << j;
    if (!(t.mask & bit)) continue;
    Formula v = Formula::var(j);
    literals.push_back((t.bits & bit) ? std::move(v) : Formula::negation(std::move(v)));
  }
  if (literals.empty()) return Formula::constant(true);
  return Formula::conjunction(std::move(literals));
}

std::vector<Implicant> prime_implicants(const std::vector<std::uint32_t>& minterms,
                                        std::size_t k) {
  const std::uint32_t full = k == 32 ? ~0u : ((1u << k) - 1u);
  std::unordered_set<Implicant, ImplicantHash> current;
  for (std::uint32_t m : minterms) current.insert({m, full});

  std::vector<Implicant> primes;
  while (!current.empty()) {
    std::unordered_set<Implicant, ImplicantHash> next;
    std::unordered_set<Implicant, ImplicantHash> merged;
    for (const Implicant& t : current) {
      for (std::size_t j = 0; j < k; ++j) {
        const std::uint32_t bit = 1u << j;
        if (!(t.mask & bit)) continue;
        Implicant partner{t.bits ^ bit, t.mask};
        if (current.contains(partner)) {
          next.insert({t.bits & ~bit, t.mask & ~bit});
          merged.insert(t);
          merged.insert(partner);
        }
      }
    }
    for (const Implicant& t : current) {
      if (!merged.contains(t)) primes.push_back(t);
    }
    current = std::move(next);
  }
  return primes;
}

}  // namespace

Formula quine_mccluskey(const std::vector<std::uint32_t>& on_set,
                        const std::vector<std::uint32_t>& dont_care, std::size_t k) {
  check_capacity(k);
  const std::uint32_t limit = static_cast<std::uint32_t>(1u << k);

  std::vector<std::uint32_t> on(on_set);
  std::sort(on.begin(), on.end());
  on.erase(std::unique(on.begin(), on.end()), on.end());
  std::vector<std::uint32_t> dc(dont_care);
  std::sort(dc.begin(), dc.end());
  dc.erase(std::unique(dc.begin(), dc.end()), dc.end());

  for (std::uint32_t m : on) {
    if (m >= limit) throw DomainError("on-set assignment out of range");
  }
  for (std::uint32_t m : dc) {
    if (m >= limit) throw DomainError("dont-care assignment out of range");
    if (std::binary_search(on.begin(), on.end(), m)) {
      throw DomainError("on-set and dont-care sets overlap at assignment " + std::to_string(m));
    }
  }

  if (on.empty()) return Formula::constant(false);

  std::vector<std::uint32_t> all(on);
  all.insert(all.end(), dc.begin(), dc.end());
  std::vector<Implicant> primes = prime_implicants(all, k);

  // Deterministic candidate order: fewer literals first, then by literal
  // sequence.
  std::sort(primes.begin(), primes.end(), [&](const Implicant& a, const Implicant& b) {
    if (a.literal_count() != b.literal_count()) return a.literal_count() < b.literal_count();
    return implicant_lex_less(a, b, k);
  });

  std::vector<Implicant> selected;
  std::set<std::uint32_t> uncovered(on.begin(), on.end());

  auto select = [&](const Implicant& t) {
    selected.push_back(t);
    for (auto it = uncovered.begin(); it != uncovered.end();) {
      if (t.covers(*it)) {
        it = uncovered.erase(it);
      } else {
        ++it;
      }
    }
  };

  // Essential primes: sole cover of some required row.
  for (std::uint32_t row : on) {
    const Implicant* only = nullptr;
    int count = 0;
    for (const Implicant& t : primes) {
      if (t.covers(row)) {
        ++count;
        only = &t;
        if (count > 1) break;
      }
    }
    if (count == 1 && uncovered.contains(row)) {
      bool already = std::find(selected.begin(), selected.end(), *only) != selected.end();
      if (!already) select(*only);
    }
  }

  // Greedy cover for the rest: most newly covered rows wins; candidate order
  // breaks ties (fewer literals, then lexicographic).
  while (!uncovered.empty()) {
    const Implicant* best = nullptr;
    std::size_t best_cover = 0;
    for (const Implicant& t : primes) {
      std::size_t cover = 0;
      for (std::uint32_t row : uncovered) {
        if (t.covers(row)) ++cover;
      }
      if (cover > best_cover) {
        best_cover = cover;
        best = &t;
      }
    }
    if (best == nullptr) {
      throw DomainError("prime implicants fail to cover the on-set");
    }
    select(*best);
  }

  std::sort(selected.begin(), selected.end(), [&](const Implicant& a, const Implicant& b) {
    return implicant_lex_less(a, b, k);
  });

  for (const Implicant& t : selected) {
    if (t.mask == 0) return Formula::constant(true);
  }

  std::vector<Formula> terms;
  terms.reserve(selected.size());
  for (const Implicant& t : selected) terms.push_back(implicant_to_formula(t, k));
  return canonical(Formula::disjunction(std::move(terms)));
}

// ---------------------------------------------------------------------------
// Derived measures

namespace {

void collect_concepts(const Formula& f, std::vector<ConceptId>& out) {
  switch (f.kind()) {
    case FormulaKind::Constant:
      return;
    case FormulaKind::Var:
      out.push_back(f.concept_id());
      return;
    default:
      for (const Formula& c : f.children()) collect_concepts(c, out);
  }
}

Formula remap_concepts(const Formula& f, const std::unordered_map<ConceptId, ConceptId>& map) {
  switch (f.kind()) {
    case FormulaKind::Constant:
      return f;
    case FormulaKind::Var:
      return Formula::var(map.at(f.concept_id()));
    case FormulaKind::Not:
      return Formula::negation(remap_concepts(f.children().front(), map));
    default: {
      std::vector<Formula> children;
      children.reserve(f.children().size());
      for (const Formula& c : f.children()) children.push_back(remap_concepts(c, map));
      return f.kind() == FormulaKind::And ? Formula::conjunction(std::move(children))
                                          : Formula::disjunction(std::move(children));
    }
  }
}

}  // namespace

std::vector<ConceptId> mentioned_concepts(const Formula& f) {
  std::vector<ConceptId> out;
  collect_concepts(f, out);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t count_literals(const Formula& f) {
  switch (f.kind()) {
    case FormulaKind::Constant:
      return 0;
    case FormulaKind::Var:
      return 1;
    default: {
      std::size_t n = 0;
      for (const Formula& c : f.children()) n += count_literals(c);
      return n;
    }
  }
}

std::size_t complexity(const Formula& f) {
  std::vector<ConceptId> vars = mentioned_concepts(f);
  if (vars.empty()) return 0;
  check_capacity(vars.size());
  std::unordered_map<ConceptId, ConceptId> to_dense;
  for (std::size_t i = 0; i < vars.size(); ++i) to_dense[vars[i]] = i;
  Formula dense = remap_concepts(f, to_dense);
  Formula minimized = quine_mccluskey(minterms_of(dense, vars.size()), {}, vars.size());
  return count_literals(minimized);
}

Formula substitute(const Formula& f, const std::vector<Formula>& replacements) {
  switch (f.kind()) {
    case FormulaKind::Constant:
      return f;
    case FormulaKind::Var:
      if (f.concept_id() >= replacements.size()) {
        throw DomainError("substitution has no formula for concept " +
                          std::to_string(f.concept_id()));
      }
      return replacements[f.concept_id()];
    case FormulaKind::Not:
      return Formula::negation(substitute(f.children().front(), replacements));
    default: {
      std::vector<Formula> children;
      children.reserve(f.children().size());
      for (const Formula& c : f.children()) children.push_back(substitute(c, replacements));
      return f.kind() == FormulaKind::And ? Formula::conjunction(std::move(children))
                                          : Formula::disjunction(std::move(children));
    }
  }
}

}  // namespace lenkit
