#include "lenkit/extraction.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "lenkit/data.hpp"
#include "lenkit/errors.hpp"
#include "lenkit/metrics.hpp"

namespace lenkit {

std::vector<std::pair<ConceptId, double>> concept_relevance(const EntropyModel& model,
                                                            std::size_t class_index) {
  if (class_index >= model.entry.n_classes) {
    throw DomainError("class " + std::to_string(class_index) + " outside [0, " +
                      std::to_string(model.entry.n_classes) + ")");
  }
  Attention att = entropy_attention(model.entry);
  std::vector<std::pair<ConceptId, double>> ranked;
  ranked.reserve(model.entry.n_concepts);
  for (std::size_t j = 0; j < model.entry.n_concepts; ++j) {
    ranked.emplace_back(j, att.alpha_norm.at(class_index, j));
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return ranked;
}

namespace {

std::vector<ConceptId> relevant_concepts(const EntropyModel& model, std::size_t class_index,
                                         double threshold) {
  Attention att = entropy_attention(model.entry);
  std::vector<ConceptId> out;
  for (std::size_t j = 0; j < model.entry.n_concepts; ++j) {
    if (att.alpha_norm.at(class_index, j) >= threshold) out.push_back(j);
  }
  return out;
}

Minterm minterm_from_row(const Matrix& x, std::size_t row,
                         const std::vector<ConceptId>& concepts, double boolean_threshold) {
  Minterm m;
  for (ConceptId j : concepts) {
    m.set(j, !(x.at(row, j) > boolean_threshold));
  }
  return m;
}

Formula minterm_formula(const Minterm& m) {
  if (m.empty()) return Formula::constant(true);
  std::vector<Formula> literals;
  literals.reserve(m.size());
  for (const Literal& lit : m.literals()) {
    Formula v = Formula::var(lit.concept_id);
    literals.push_back(lit.negated ? Formula::negation(std::move(v)) : std::move(v));
  }
  return Formula::conjunction(std::move(literals));
}

Formula disjunction_of(const std::vector<Minterm>& minterms) {
  std::vector<Formula> terms;
  terms.reserve(minterms.size());
  for (const Minterm& m : minterms) terms.push_back(minterm_formula(m));
  return canonical(Formula::disjunction(std::move(terms)));
}

// Minimizes over the mentioned concepts only, mapping ids down and back.
Formula simplify_formula(const Formula& f, std::size_t max_concepts) {
  std::vector<ConceptId> vars = mentioned_concepts(f);
  if (vars.empty() || vars.size() > max_concepts) return f;
  std::unordered_map<ConceptId, ConceptId> down;
  for (std::size_t i = 0; i < vars.size(); ++i) down[vars[i]] = i;

  // Remap through substitution: dense formula evaluated on dense vars.
  std::vector<Formula> up;
  up.reserve(vars.size());
  for (ConceptId v : vars) up.push_back(Formula::var(v));

  struct Remap {
    const std::unordered_map<ConceptId, ConceptId>& down;
    Formula operator()(const Formula& g) const {
      switch (g.kind()) {
        case FormulaKind::Constant:
          return g;
        case FormulaKind::Var:
          return Formula::var(down.at(g.concept_id()));
        case FormulaKind::Not:
          return Formula::negation((*this)(g.children().front()));
        default: {
          std::vector<Formula> children;
          children.reserve(g.children().size());
          for (const Formula& c : g.children()) children.push_back((*this)(c));
          return g.kind() == FormulaKind::And ? Formula::conjunction(std::move(children))
                                              : Formula::disjunction(std::move(children));
        }
      }
    }
  };
  Formula dense = Remap{down}(f);
  Formula minimized = quine_mccluskey(minterms_of(dense, vars.size()), {}, vars.size());
  return canonical(substitute(minimized, up));
}

}  // namespace

Minterm local_explanation(const EntropyModel& model, const Matrix& x, std::size_t row,
                          std::size_t class_index, const ExtractionOptions& options) {
  if (row >= x.rows()) throw DomainError("sample row out of range");
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double v = x.at(row, j);
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("concept value " + std::to_string(v) + " lies outside [0, 1]");
    }
  }
  std::vector<ConceptId> concepts =
      relevant_concepts(model, class_index, options.relevance_threshold);
  return minterm_from_row(x, row, concepts, options.boolean_threshold);
}

ExplanationReport explain_class(const EntropyModel& model, const Matrix& x_train,
                                const std::vector<int>& y_train, const Matrix& x_val,
                                const std::vector<int>& y_val, std::size_t class_index,
                                const ExtractionOptions& options) {
  if (class_index >= model.entry.n_classes) {
    throw DomainError("class " + std::to_string(class_index) + " outside [0, " +
                      std::to_string(model.entry.n_classes) + ")");
  }
  std::vector<int> predictions = predict(model, x_train);
  std::vector<ConceptId> concepts =
      relevant_concepts(model, class_index, options.relevance_threshold);

  // Local minterms of correctly predicted positives, with multiplicity.
  std::map<Minterm, std::size_t> coverage;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < x_train.rows(); ++i) {
    if (static_cast<std::size_t>(y_train[i]) != class_index) continue;
    ++positives;
    if (predictions[i] != y_train[i]) continue;
    Minterm m = minterm_from_row(x_train, i, concepts, options.boolean_threshold);
    if (m.empty()) continue;  // constant True carries no class information
    coverage[m] += 1;
  }
  if (positives == 0) {
    throw ExtractionError("class " + std::to_string(class_index) +
                          ": no positive samples in the training split");
  }
  if (coverage.empty()) {
    throw ExtractionError("class " + std::to_string(class_index) +
                          ": no correctly predicted positive sample yields a usable minterm");
  }

  // Rank by training coverage, ties by minterm order.
  std::vector<std::pair<Minterm, std::size_t>> candidates(coverage.begin(), coverage.end());
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<Minterm> kept{candidates.front().first};
  std::size_t support = candidates.front().second;
  double best_val =
      test_explanation(disjunction_of(kept), x_val, y_val, class_index, options.boolean_threshold)
          .accuracy;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    std::vector<Minterm> trial = kept;
    trial.push_back(candidates[i].first);
    double acc =
        test_explanation(disjunction_of(trial), x_val, y_val, class_index,
                         options.boolean_threshold)
            .accuracy;
    if (acc > best_val) {
      kept = std::move(trial);
      best_val = acc;
      support += candidates[i].second;
    }
  }

  Formula formula = simplify_formula(disjunction_of(kept), options.simplify_max_concepts);

  ExplanationReport report;
  report.class_index = class_index;
  report.formula = formula;
  report.train_accuracy =
      test_explanation(formula, x_train, y_train, class_index, options.boolean_threshold)
          .accuracy;
  report.validation_accuracy =
      test_explanation(formula, x_val, y_val, class_index, options.boolean_threshold).accuracy;
  report.complexity = complexity(formula);
  report.support = support;
  report.relevant_concepts = concepts;
  return report;
}

std::vector<ExplanationReport> explain_all(const EntropyModel& model, const Matrix& x_train,
                                           const std::vector<int>& y_train, const Matrix& x_val,
                                           const std::vector<int>& y_val,
                                           const ExtractionOptions& options) {
  std::vector<ExplanationReport> reports;
  reports.reserve(model.entry.n_classes);
  for (std::size_t c = 0; c < model.entry.n_classes; ++c) {
    try {
      reports.push_back(explain_class(model, x_train, y_train, x_val, y_val, c, options));
    } catch (const ExtractionError& e) {
      ExplanationReport failed;
      failed.class_index = c;
      failed.formula = Formula::constant(false);
      failed.error = e.what();
      failed.relevant_concepts = relevant_concepts(model, c, options.relevance_threshold);
      reports.push_back(std::move(failed));
    }
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Psi network extraction

namespace {

constexpr std::size_t kPsiFanInCap = 12;

// Formula of one sigmoid neuron over its retained inputs, by truth-table
// enumeration and minimization.
Formula neuron_formula(const DenseLayer& layer, std::size_t neuron,
                       const std::vector<Formula>& input_formulas) {
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < layer.in_size(); ++j) {
    if (layer.weights.at(neuron, j) != 0.0) active.push_back(j);
  }
  if (active.size() > kPsiFanInCap) {
    throw CapacityError("neuron keeps " + std::to_string(active.size()) +
                        " inputs, truth-table extraction caps at " +
                        std::to_string(kPsiFanInCap));
  }

  const double bias = layer.bias[neuron];
  if (active.empty()) return Formula::constant(bias > 0.0);

  std::vector<std::uint32_t> on;
  const std::uint32_t limit = 1u << active.size();
  for (std::uint32_t m = 0; m < limit; ++m) {
    double z = bias;
    for (std::size_t a = 0; a < active.size(); ++a) {
      if ((m >> a) & 1u) z += layer.weights.at(neuron, active[a]);
    }
    if (z > 0.0) on.push_back(m);  // sigmoid(z) > 0.5
  }
  Formula local = quine_mccluskey(on, {}, active.size());

  std::vector<Formula> replacements;
  replacements.reserve(active.size());
  for (std::size_t j : active) replacements.push_back(input_formulas[j]);
  return substitute(local, replacements);
}

}  // namespace

std::vector<Formula> psi_explain(const PsiNetwork& network) {
  if (network.layers.empty()) throw DomainError("psi network has no layers");
  std::vector<Formula> current;
  for (std::size_t j = 0; j < network.layers.front().in_size(); ++j) {
    current.push_back(Formula::var(j));
  }
  for (const DenseLayer& layer : network.layers) {
    std::vector<Formula> next;
    next.reserve(layer.out_size());
    for (std::size_t o = 0; o < layer.out_size(); ++o) {
      next.push_back(neuron_formula(layer, o, current));
    }
    current = std::move(next);
  }
  for (Formula& f : current) {
    f = simplify_formula(f, kPsiFanInCap);
  }
  return current;
}

}  // namespace lenkit
