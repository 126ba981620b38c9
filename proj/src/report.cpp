#include "lenkit/report.hpp"

#include <algorithm>
#include <fstream>

#include "lenkit/errors.hpp"
#include "lenkit/metrics.hpp"
#include "lenkit/version.hpp"

namespace lenkit {

namespace {

using nlohmann::json;

std::string model_kind_name(ModelKind kind) {
  return kind == ModelKind::Entropy ? "entropy" : "psi";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "entropy") return ModelKind::Entropy;
  if (name == "psi") return ModelKind::Psi;
  throw DomainError("unknown model kind '" + name + "', expected 'entropy' or 'psi'");
}

}  // namespace

std::string RunConfig::resolved_out_path() const {
  if (!out_path.empty()) return out_path;
  std::string name = "report_seed";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i > 0) name += '-';
    name += std::to_string(seeds[i]);
  }
  return name + ".json";
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  if (j.contains("data")) c.data_path = j.at("data").get<std::string>();
  if (j.contains("label_column")) c.label_column = j.at("label_column").get<std::string>();
  if (j.contains("model")) c.model = model_kind_from_name(j.at("model").get<std::string>());
  if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  if (j.contains("learning_rate")) c.train.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("epochs")) c.train.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("entropy_weight")) c.train.entropy_weight = j.at("entropy_weight").get<double>();
  if (j.contains("beta1")) c.train.beta1 = j.at("beta1").get<double>();
  if (j.contains("beta2")) c.train.beta2 = j.at("beta2").get<double>();
  if (j.contains("epsilon")) c.train.epsilon = j.at("epsilon").get<double>();
  if (j.contains("weight_decay")) c.train.weight_decay = j.at("weight_decay").get<double>();
  if (j.contains("temperature")) c.temperature = j.at("temperature").get<double>();
  if (j.contains("leaky_slope")) c.leaky_slope = j.at("leaky_slope").get<double>();
  if (j.contains("relevance_threshold")) {
    c.extraction.relevance_threshold = j.at("relevance_threshold").get<double>();
  }
  if (j.contains("boolean_threshold")) {
    c.extraction.boolean_threshold = j.at("boolean_threshold").get<double>();
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    c.fractions.train = s.at("train").get<double>();
    c.fractions.validation = s.at("validation").get<double>();
    c.fractions.test = s.at("test").get<double>();
  }
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("fan_in")) c.fan_in = j.at("fan_in").get<std::size_t>();
  if (j.contains("out")) c.out_path = j.at("out").get<std::string>();
  return c;
}

json to_json(const RunConfig& c) {
  return json{{"data", c.data_path},
              {"label_column", c.label_column},
              {"model", model_kind_name(c.model)},
              {"hidden", c.hidden},
              {"learning_rate", c.train.learning_rate},
              {"epochs", c.train.epochs},
              {"entropy_weight", c.train.entropy_weight},
              {"beta1", c.train.beta1},
              {"beta2", c.train.beta2},
              {"epsilon", c.train.epsilon},
              {"weight_decay", c.train.weight_decay},
              {"temperature", c.temperature},
              {"leaky_slope", c.leaky_slope},
              {"relevance_threshold", c.extraction.relevance_threshold},
              {"boolean_threshold", c.extraction.boolean_threshold},
              {"split",
               {{"train", c.fractions.train},
                {"validation", c.fractions.validation},
                {"test", c.fractions.test}}},
              {"seeds", c.seeds},
              {"fan_in", c.fan_in},
              {"out", c.resolved_out_path()}};
}

namespace {

json to_json(const ClassResult& r) {
  json j{{"class", r.class_index},
         {"class_name", r.class_name},
         {"train_accuracy", r.train_accuracy},
         {"validation_accuracy", r.validation_accuracy},
         {"test_accuracy", r.metrics.accuracy},
         {"fidelity", r.metrics.fidelity},
         {"complexity", r.metrics.complexity},
         {"support", r.support},
         {"relevant_concepts", r.relevant_concepts}};
  j["formula"] = r.formula ? json(*r.formula) : json(nullptr);
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  return j;
}

json to_json(const SeedResult& r) {
  json classes = json::array();
  for (const ClassResult& c : r.classes) classes.push_back(to_json(c));
  return json{{"seed", r.seed},
              {"loss_tail", r.loss_tail},
              {"model_accuracy",
               {{"train", r.train_model_accuracy},
                {"validation", r.validation_model_accuracy},
                {"test", r.test_model_accuracy}}},
              {"explanations", classes},
              {"warnings", r.warnings}};
}

std::vector<double> tail(const std::vector<double>& v, std::size_t n) {
  if (v.size() <= n) return v;
  return {v.end() - static_cast<std::ptrdiff_t>(n), v.end()};
}

ClassResult score_class(const Formula& formula, std::size_t class_index,
                        const Dataset& train_ds, const Dataset& val_ds, const Dataset& test_ds,
                        const std::vector<int>& model_test_predictions,
                        const ExtractionOptions& options) {
  ClassResult out;
  out.class_index = class_index;
  out.class_name = train_ds.class_names[class_index];
  out.formula = format(formula, train_ds.concept_names);
  out.train_accuracy =
      test_explanation(formula, train_ds.x, train_ds.y, class_index, options.boolean_threshold)
          .accuracy;
  out.validation_accuracy =
      test_explanation(formula, val_ds.x, val_ds.y, class_index, options.boolean_threshold)
          .accuracy;
  TestExplanationResult on_test =
      test_explanation(formula, test_ds.x, test_ds.y, class_index, options.boolean_threshold);
  out.metrics.accuracy = on_test.accuracy;
  std::vector<bool> model_class(model_test_predictions.size());
  for (std::size_t i = 0; i < model_test_predictions.size(); ++i) {
    model_class[i] = model_test_predictions[i] >= 0 &&
                     static_cast<std::size_t>(model_test_predictions[i]) == class_index;
  }
  out.metrics.fidelity = fidelity(on_test.predictions, model_class);
  out.metrics.complexity = complexity(formula);
  return out;
}

SeedResult run_entropy_seed(const RunConfig& config, const Dataset& dataset,
                            std::uint64_t seed) {
  SeedResult result;
  result.seed = seed;
  Split parts = split(dataset, config.fractions, seed);
  Dataset train_ds = take(dataset, parts.train);
  Dataset val_ds = take(dataset, parts.validation);
  Dataset test_ds = take(dataset, parts.test);

  EntropyModel model =
      make_entropy_model(dataset.n_concepts(), config.hidden, dataset.n_classes(), seed,
                         config.temperature, config.leaky_slope);
  TrainConfig tc = config.train;
  tc.seed = seed;
  TrainResult trained = train(std::move(model), train_ds.x, train_ds.y, tc);
  result.loss_tail = tail(trained.loss_history, 10);
  result.train_model_accuracy = accuracy(predict(trained.model, train_ds.x), train_ds.y);
  result.validation_model_accuracy = accuracy(predict(trained.model, val_ds.x), val_ds.y);
  result.test_model_accuracy = accuracy(predict(trained.model, test_ds.x), test_ds.y);

  std::vector<int> test_predictions = predict(trained.model, test_ds.x);
  std::vector<ExplanationReport> reports = explain_all(
      trained.model, train_ds.x, train_ds.y, val_ds.x, val_ds.y, config.extraction);
  for (const ExplanationReport& report : reports) {
    if (report.error) {
      ClassResult failed;
      failed.class_index = report.class_index;
      failed.class_name = dataset.class_names[report.class_index];
      failed.error = report.error;
      result.classes.push_back(std::move(failed));
      continue;
    }
    ClassResult scored = score_class(report.formula, report.class_index, train_ds, val_ds,
                                     test_ds, test_predictions, config.extraction);
    scored.support = report.support;
    for (ConceptId id : report.relevant_concepts) {
      scored.relevant_concepts.push_back(dataset.concept_names[id]);
    }
    result.classes.push_back(std::move(scored));
  }
  return result;
}

SeedResult run_psi_seed(const RunConfig& config, const Dataset& dataset, std::uint64_t seed) {
  SeedResult result;
  result.seed = seed;
  Split parts = split(dataset, config.fractions, seed);
  Dataset train_ds = take(dataset, parts.train);
  Dataset val_ds = take(dataset, parts.validation);
  Dataset test_ds = take(dataset, parts.test);

  PsiNetwork net = make_psi_network(dataset.n_concepts(), config.hidden, dataset.n_classes(),
                                    seed, config.fan_in);
  TrainConfig tc = config.train;
  tc.seed = seed;
  PsiTrainResult trained = psi_train_prune(std::move(net), train_ds.x, train_ds.y, tc,
                                           config.fan_in);
  result.warnings = trained.warnings;
  result.loss_tail = tail(trained.loss_history, 10);
  result.train_model_accuracy = accuracy(psi_predict(trained.network, train_ds.x), train_ds.y);
  result.validation_model_accuracy = accuracy(psi_predict(trained.network, val_ds.x), val_ds.y);
  result.test_model_accuracy = accuracy(psi_predict(trained.network, test_ds.x), test_ds.y);

  std::vector<int> test_predictions = psi_predict(trained.network, test_ds.x);
  std::vector<Formula> formulas = psi_explain(trained.network);
  for (std::size_t c = 0; c < formulas.size(); ++c) {
    ClassResult scored = score_class(formulas[c], c, train_ds, val_ds, test_ds,
                                     test_predictions, config.extraction);
    for (ConceptId id : mentioned_concepts(formulas[c])) {
      scored.relevant_concepts.push_back(dataset.concept_names[id]);
    }
    // Support: positives of the training split the formula covers.
    TestExplanationResult on_train = test_explanation(formulas[c], train_ds.x, train_ds.y, c,
                                                      config.extraction.boolean_threshold);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < train_ds.n_rows(); ++i) {
      if (on_train.predictions[i] && static_cast<std::size_t>(train_ds.y[i]) == c) ++covered;
    }
    scored.support = covered;
    result.classes.push_back(std::move(scored));
  }
  return result;
}

}  // namespace

json to_json(const RunReport& report) {
  json runs = json::array();
  for (const SeedResult& r : report.runs) runs.push_back(to_json(r));
  json consistency = json::array();
  for (const auto& value : report.consistency_per_class) {
    consistency.push_back(value ? json(*value) : json(nullptr));
  }
  return json{{"version", report.version},
              {"config", to_json(report.config)},
              {"runs", runs},
              {"consistency_per_class", consistency}};
}

RunReport run_train_explain(const RunConfig& config) {
  if (config.seeds.empty()) throw DomainError("at least one seed is required");
  Dataset dataset = load_csv(config.data_path, config.label_column);

  RunReport report;
  report.version = kVersion;
  report.config = config;
  for (std::uint64_t seed : config.seeds) {
    report.runs.push_back(config.model == ModelKind::Entropy
                              ? run_entropy_seed(config, dataset, seed)
                              : run_psi_seed(config, dataset, seed));
  }

  // Concept-set stability across seeds, class by class.
  for (std::size_t c = 0; c < dataset.n_classes(); ++c) {
    std::vector<Formula> formulas;
    for (const SeedResult& run : report.runs) {
      for (const ClassResult& cls : run.classes) {
        if (cls.class_index == c && cls.formula) {
          formulas.push_back(parse(*cls.formula, dataset.concept_names));
        }
      }
    }
    if (formulas.size() >= 2) {
      report.consistency_per_class.emplace_back(consistency(formulas, dataset.n_concepts()));
    } else {
      report.consistency_per_class.emplace_back(std::nullopt);
    }
  }

  std::ofstream out(config.resolved_out_path());
  if (!out) throw DataError("cannot write report to '" + config.resolved_out_path() + "'");
  out << to_json(report).dump(2) << '\n';
  return report;
}

}  // namespace lenkit
