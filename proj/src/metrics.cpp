#include "lenkit/metrics.hpp"

#include <algorithm>
#include <string>

#include "lenkit/data.hpp"
#include "lenkit/errors.hpp"

namespace lenkit {

TestExplanationResult test_explanation(const Formula& formula, const Matrix& x,
                                       const std::vector<int>& labels, std::size_t class_index,
                                       double boolean_threshold) {
  if (labels.size() != x.rows()) {
    throw DimensionError("test_explanation: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(x.rows()) + " rows");
  }
  TestExplanationResult result;
  result.predictions.reserve(x.rows());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    bool pred = evaluate(formula, booleanize_row(x, i, boolean_threshold));
    result.predictions.push_back(pred);
    bool positive = labels[i] >= 0 && static_cast<std::size_t>(labels[i]) == class_index;
    if (pred == positive) ++hits;
  }
  result.accuracy =
      x.rows() == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(x.rows());
  return result;
}

double fidelity(const std::vector<bool>& formula_preds, const std::vector<bool>& model_preds) {
  if (formula_preds.size() != model_preds.size()) {
    throw DimensionError("fidelity: prediction vectors of length " +
                         std::to_string(formula_preds.size()) + " and " +
                         std::to_string(model_preds.size()));
  }
  if (formula_preds.empty()) return 0.0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < formula_preds.size(); ++i) {
    if (formula_preds[i] == model_preds[i]) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(formula_preds.size());
}

double consistency(const std::vector<Formula>& formulas, std::size_t n_concepts) {
  if (formulas.size() < 2) {
    throw DomainError("consistency needs at least two formulas");
  }
  std::vector<std::vector<ConceptId>> sets;
  sets.reserve(formulas.size());
  for (const Formula& f : formulas) {
    std::vector<ConceptId> mentioned = mentioned_concepts(f);
    for (ConceptId id : mentioned) {
      if (id >= n_concepts) {
        throw DomainError("formula mentions concept " + std::to_string(id) +
                          " beyond table size " + std::to_string(n_concepts));
      }
    }
    sets.push_back(std::move(mentioned));
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < sets.size(); ++a) {
    for (std::size_t b = a + 1; b < sets.size(); ++b) {
      std::vector<ConceptId> inter;
      std::set_intersection(sets[a].begin(), sets[a].end(), sets[b].begin(), sets[b].end(),
                            std::back_inserter(inter));
      std::vector<ConceptId> uni;
      std::set_union(sets[a].begin(), sets[a].end(), sets[b].begin(), sets[b].end(),
                     std::back_inserter(uni));
      total += uni.empty() ? 1.0 : static_cast<double>(inter.size()) / uni.size();
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

}  // namespace lenkit
