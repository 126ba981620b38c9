#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lenkit/logic.hpp"
#include "lenkit/matrix.hpp"
#include "lenkit/nn.hpp"

namespace lenkit {

struct ExtractionOptions {
  double relevance_threshold = 0.5;   // on alpha_norm
  double boolean_threshold = 0.5;     // on concept activations
  std::size_t simplify_max_concepts = 12;
};

// Class-level logic explanation with its quality statistics. `error` is set
// instead of a formula when extraction failed for that class.
struct ExplanationReport {
  std::size_t class_index = 0;
  Formula formula;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  std::size_t complexity = 0;
  std::size_t support = 0;  // training samples whose minterm was kept
  std::vector<ConceptId> relevant_concepts;
  std::optional<std::string> error;
};

// Concepts ranked by attention strength for one class: alpha_norm
// descending, index ascending on ties.
std::vector<std::pair<ConceptId, double>> concept_relevance(const EntropyModel& model,
                                                            std::size_t class_index);

// Booleanizes the relevant concepts of one sample into a minterm. Concepts
// whose attention falls below the relevance threshold are dropped; an empty
// result stands for the constant True.
Minterm local_explanation(const EntropyModel& model, const Matrix& x, std::size_t row,
                          std::size_t class_index, const ExtractionOptions& options = {});

// Collects local minterms from correctly predicted class positives on the
// training split, greedily keeps the ones whose disjunction improves
// validation accuracy, then minimizes the result. Throws ExtractionError
// when no usable minterm exists.
ExplanationReport explain_class(const EntropyModel& model, const Matrix& x_train,
                                const std::vector<int>& y_train, const Matrix& x_val,
                                const std::vector<int>& y_val, std::size_t class_index,
                                const ExtractionOptions& options = {});

// explain_class for every class; failures become error markers instead of
// aborting the batch.
std::vector<ExplanationReport> explain_all(const EntropyModel& model, const Matrix& x_train,
                                           const std::vector<int>& y_train, const Matrix& x_val,
                                           const std::vector<int>& y_val,
                                           const ExtractionOptions& options = {});

// Reads a pruned sigmoid network as logic: each neuron's truth table over
// its retained inputs is minimized, then neuron formulas are substituted
// layer by layer. Returns one formula per class output. The result matches
// the network when every sigmoid is thresholded at 0.5.
std::vector<Formula> psi_explain(const PsiNetwork& network);

}  // namespace lenkit
