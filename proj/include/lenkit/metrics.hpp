#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "lenkit/logic.hpp"
#include "lenkit/matrix.hpp"

namespace lenkit {

struct MetricRecord {
  double accuracy = 0.0;
  double fidelity = 0.0;
  std::optional<double> consistency;
  std::size_t complexity = 0;
};

struct TestExplanationResult {
  double accuracy = 0.0;
  std::vector<bool> predictions;
};

// Booleanizes the concept matrix at the threshold, evaluates the formula on
// every row and scores it against the class-c indicator of the labels.
TestExplanationResult test_explanation(const Formula& formula, const Matrix& x,
                                       const std::vector<int>& labels, std::size_t class_index,
                                       double boolean_threshold = 0.5);

// Agreement rate between the formula's predictions and the model's
// class-c predictions. Symmetric.
double fidelity(const std::vector<bool>& formula_preds, const std::vector<bool>& model_preds);

// Mean pairwise Jaccard similarity of the concept sets mentioned by the
// formulas. Needs at least two formulas; two empty sets count as identical.
double consistency(const std::vector<Formula>& formulas, std::size_t n_concepts);

}  // namespace lenkit
