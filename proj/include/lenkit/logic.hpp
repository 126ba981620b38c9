#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lenkit {

using ConceptId = std::size_t;

// One (possibly negated) concept predicate.
struct Literal {
  ConceptId concept_id = 0;
  bool negated = false;

  // Orders by concept index, positive literal before negated.
  auto operator<=>(const Literal&) const = default;
};

// Conjunction of literals, at most one per concept. Kept sorted by concept
// index; the empty minterm is the constant True.
class Minterm {
 public:
  Minterm() = default;

  // Inserts a literal. Throws DomainError if the opposite polarity is
  // already present.
  void set(ConceptId concept_id, bool negated);

  const std::vector<Literal>& literals() const { return literals_; }
  bool empty() const { return literals_.empty(); }
  std::size_t size() const { return literals_.size(); }

  bool evaluate(const std::vector<bool>& assignment) const;

  auto operator<=>(const Minterm&) const = default;

 private:
  std::vector<Literal> literals_;
};

enum class FormulaKind { Constant, Var, Not, And, Or };

// Propositional AST over concept ids. And/Or carry one or more children.
class Formula {
 public:
  Formula() : kind_(FormulaKind::Constant), value_(false) {}

  static Formula constant(bool value);
  static Formula var(ConceptId concept_id);
  static Formula negation(Formula operand);
  static Formula conjunction(std::vector<Formula> children);
  static Formula disjunction(std::vector<Formula> children);

  FormulaKind kind() const { return kind_; }
  bool value() const { return value_; }
  ConceptId concept_id() const { return concept_; }
  const std::vector<Formula>& children() const { return children_; }

  bool operator==(const Formula&) const = default;

 private:
  FormulaKind kind_;
  bool value_ = false;
  ConceptId concept_ = 0;
  std::vector<Formula> children_;
};

// Deterministic total order used for canonical printing: nodes compare by
// the smallest concept they mention, then by kind, then structurally.
bool formula_less(const Formula& a, const Formula& b);

// Flattens nested And/And and Or/Or chains and sorts children, so equal
// formulas print identically.
Formula canonical(const Formula& f);

// Text grammar: identifiers, ~ or the negation sign, & or the conjunction
// sign, | or the disjunction sign, parentheses, True/False. Precedence
// not > and > or. Throws ParseError (with byte offset) on bad syntax or
// unknown identifiers.
Formula parse(std::string_view text, const std::vector<std::string>& names);

// Canonical text form; parse(format(f)) equals canonical(f).
std::string format(const Formula& f, const std::vector<std::string>& names);

bool evaluate(const Formula& f, const std::vector<bool>& assignment);

// Satisfying full assignments over k concepts, as bit masks with bit j
// holding concept j. Sorted ascending. k is capped at 20.
std::vector<std::uint32_t> minterms_of(const Formula& f, std::size_t k);

// Prime implicants by iterative merging, then essential + greedy cover of
// the on-set. The result agrees with the on-set everywhere outside
// dont_care. Throws DomainError if the two sets overlap.
Formula quine_mccluskey(const std::vector<std::uint32_t>& on_set,
                        const std::vector<std::uint32_t>& dont_care, std::size_t k);

// Brute-force equality over all 2^k assignments.
bool equivalent(const Formula& f, const Formula& g, std::size_t k);

// Literal count of the minimized DNF of f over the concepts it mentions.
// Constants have complexity 0.
std::size_t complexity(const Formula& f);

// Concepts appearing in f, sorted, unique.
std::vector<ConceptId> mentioned_concepts(const Formula& f);

// Number of variable occurrences (literal count for DNF-shaped formulas).
std::size_t count_literals(const Formula& f);

// Replaces Var(i) with replacements[i]. Every mentioned id must be in range.
Formula substitute(const Formula& f, const std::vector<Formula>& replacements);

}  // namespace lenkit
