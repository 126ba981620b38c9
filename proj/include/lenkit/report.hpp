#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lenkit/data.hpp"
#include "lenkit/extraction.hpp"
#include "lenkit/metrics.hpp"
#include "lenkit/nn.hpp"

namespace lenkit {

enum class ModelKind { Entropy, Psi };

// Everything a reproducible run needs; serialized back into the report.
struct RunConfig {
  std::string data_path;
  std::string label_column = "label";
  ModelKind model = ModelKind::Entropy;
  std::vector<std::size_t> hidden = {10, 4};
  TrainConfig train;
  double temperature = 1.0;
  double leaky_slope = 0.01;
  ExtractionOptions extraction;
  SplitFractions fractions;
  std::vector<std::uint64_t> seeds = {0};
  std::size_t fan_in = 2;
  std::string out_path;  // empty: derived from the seed list

  std::string resolved_out_path() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);

struct ClassResult {
  std::size_t class_index = 0;
  std::string class_name;
  std::optional<std::string> formula;  // canonical text, absent on failure
  std::optional<std::string> error;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  MetricRecord metrics;  // accuracy and fidelity on the test split
  std::size_t support = 0;
  std::vector<std::string> relevant_concepts;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<double> loss_tail;
  double train_model_accuracy = 0.0;
  double validation_model_accuracy = 0.0;
  double test_model_accuracy = 0.0;
  std::vector<ClassResult> classes;
  std::vector<std::string> warnings;
};

struct RunReport {
  std::string version;
  RunConfig config;
  std::vector<SeedResult> runs;
  // Cross-seed concept-set stability per class, absent with fewer than two
  // usable formulas.
  std::vector<std::optional<double>> consistency_per_class;
};

nlohmann::json to_json(const RunReport& report);

// Loads the dataset, then per seed: split, train, explain, score. Writes
// the JSON report to config.resolved_out_path().
RunReport run_train_explain(const RunConfig& config);

}  // namespace lenkit
