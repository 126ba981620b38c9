// Command line front end: train models and extract explanations, score a
// formula against a dataset, or minimize a formula.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lenkit/data.hpp"
#include "lenkit/errors.hpp"
#include "lenkit/logic.hpp"
#include "lenkit/metrics.hpp"
#include "lenkit/report.hpp"
#include "lenkit/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTraining = 3;

// Shortest round-trip decimal, always with a decimal point ("1.0", "0.5").
std::string format_fraction(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, ptr);
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
    s += ".0";
  }
  return s;
}

std::vector<std::string> split_names(const std::string& csv) {
  std::vector<std::string> names;
  std::string current;
  for (char c : csv) {
    if (c == ',') {
      names.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  names.push_back(current);
  return names;
}

struct TrainArgs {
  std::string config_path;
  std::optional<std::string> data;
  std::optional<std::string> label_column;
  std::optional<std::string> model;
  std::vector<std::size_t> hidden;
  std::optional<double> lr;
  std::optional<std::size_t> epochs;
  std::optional<double> entropy_weight;
  std::vector<std::uint64_t> seeds;
  std::optional<std::string> out;
};

lenkit::RunConfig resolve_config(const TrainArgs& args) {
  nlohmann::json j = nlohmann::json::object();
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw lenkit::DataError("cannot open config '" + args.config_path + "'");
    in >> j;
  }
  lenkit::RunConfig config = lenkit::run_config_from_json(j);
  if (args.data) config.data_path = *args.data;
  if (args.label_column) config.label_column = *args.label_column;
  if (args.model) {
    if (*args.model == "entropy") {
      config.model = lenkit::ModelKind::Entropy;
    } else if (*args.model == "psi") {
      config.model = lenkit::ModelKind::Psi;
    } else {
      throw lenkit::DomainError("unknown model '" + *args.model + "'");
    }
  }
  if (!args.hidden.empty()) config.hidden = args.hidden;
  if (args.lr) config.train.learning_rate = *args.lr;
  if (args.epochs) config.train.epochs = *args.epochs;
  if (args.entropy_weight) config.train.entropy_weight = *args.entropy_weight;
  if (!args.seeds.empty()) config.seeds = args.seeds;
  if (args.out) config.out_path = *args.out;
  if (config.data_path.empty()) {
    throw lenkit::DomainError("no dataset given; use --data or the config file");
  }
  return config;
}

int run_train(const TrainArgs& args) {
  lenkit::RunConfig config = resolve_config(args);
  lenkit::RunReport report = lenkit::run_train_explain(config);
  std::cout << "report written to " << config.resolved_out_path() << "\n";
  for (const lenkit::SeedResult& run : report.runs) {
    std::cout << "seed " << run.seed << ": model accuracy train "
              << format_fraction(run.train_model_accuracy) << ", validation "
              << format_fraction(run.validation_model_accuracy) << ", test "
              << format_fraction(run.test_model_accuracy) << "\n";
    for (const lenkit::ClassResult& cls : run.classes) {
      std::cout << "  class " << cls.class_name << ": ";
      if (cls.error) {
        std::cout << "no explanation (" << *cls.error << ")\n";
      } else {
        std::cout << *cls.formula << "  [test accuracy "
                  << format_fraction(cls.metrics.accuracy) << ", fidelity "
                  << format_fraction(cls.metrics.fidelity) << ", complexity "
                  << cls.metrics.complexity << "]\n";
      }
    }
  }
  return kExitOk;
}

int run_eval_formula(const std::string& formula_text, const std::string& data_path,
                     const std::string& class_label, double threshold,
                     const std::string& label_column) {
  lenkit::Dataset dataset = lenkit::load_csv(data_path, label_column);
  std::size_t class_index = 0;
  bool found = false;
  for (std::size_t c = 0; c < dataset.class_names.size(); ++c) {
    if (dataset.class_names[c] == class_label) {
      class_index = c;
      found = true;
      break;
    }
  }
  if (!found) {
    std::size_t parsed = 0;
    auto [ptr, ec] = std::from_chars(class_label.data(),
                                     class_label.data() + class_label.size(), parsed);
    if (ec == std::errc() && ptr == class_label.data() + class_label.size() &&
        parsed < dataset.n_classes()) {
      class_index = parsed;
    } else {
      throw lenkit::DomainError("class '" + class_label + "' not found in the dataset");
    }
  }
  lenkit::Formula formula = lenkit::parse(formula_text, dataset.concept_names);
  auto result =
      lenkit::test_explanation(formula, dataset.x, dataset.y, class_index, threshold);
  std::cout << format_fraction(result.accuracy) << "\n";
  return kExitOk;
}

int run_simplify(const std::string& formula_text, const std::string& names_csv) {
  std::vector<std::string> names = split_names(names_csv);
  lenkit::Formula formula = lenkit::parse(formula_text, names);
  std::vector<lenkit::ConceptId> vars = lenkit::mentioned_concepts(formula);
  lenkit::Formula minimized;
  if (vars.empty()) {
    minimized = lenkit::Formula::constant(lenkit::evaluate(formula, {}));
  } else {
    // Minimize over the mentioned concepts; identifiers keep their ids.
    std::vector<lenkit::ConceptId> dense_to_orig = vars;
    std::vector<lenkit::Formula> down(names.size(), lenkit::Formula::constant(false));
    for (std::size_t i = 0; i < vars.size(); ++i) {
      down[vars[i]] = lenkit::Formula::var(i);
    }
    lenkit::Formula dense = lenkit::substitute(formula, down);
    lenkit::Formula dense_min =
        lenkit::quine_mccluskey(lenkit::minterms_of(dense, vars.size()), {}, vars.size());
    std::vector<lenkit::Formula> up;
    up.reserve(vars.size());
    for (lenkit::ConceptId v : dense_to_orig) up.push_back(lenkit::Formula::var(v));
    minimized = lenkit::substitute(dense_min, up);
  }
  std::cout << lenkit::format(minimized, names) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept-based classifiers with logic explanations"};
  app.set_version_flag("--version", lenkit::kVersion);
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a model and extract explanations");
  train->add_option("--config", train_args.config_path, "JSON config file");
  std::string data_opt, label_opt, model_opt, out_opt;
  double lr_opt = 0.0, ew_opt = 0.0;
  std::size_t epochs_opt = 0;
  train->add_option("--data", data_opt, "dataset CSV path");
  train->add_option("--label-column", label_opt, "label column name");
  train->add_option("--model", model_opt, "entropy | psi");
  train->add_option("--hidden", train_args.hidden, "hidden layer sizes");
  auto* lr_flag = train->add_option("--lr", lr_opt, "learning rate");
  auto* epochs_flag = train->add_option("--epochs", epochs_opt, "training epochs");
  auto* ew_flag = train->add_option("--entropy-weight", ew_opt, "attention entropy weight");
  train->add_option("--seed", train_args.seeds, "seeds (repeatable)");
  train->add_option("--out", out_opt, "report output path");

  std::string formula_text, eval_data, eval_class = "1", names_csv, eval_label_column = "label";
  double eval_threshold = 0.5;
  CLI::App* eval = app.add_subcommand("eval-formula", "Score a formula against a dataset");
  eval->add_option("--formula", formula_text, "formula text")->required();
  eval->add_option("--data", eval_data, "dataset CSV path")->required();
  eval->add_option("--class", eval_class, "target class (name or index)");
  eval->add_option("--threshold", eval_threshold, "boolean threshold");
  eval->add_option("--label-column", eval_label_column, "label column name");

  std::string simplify_formula_text, simplify_names;
  CLI::App* simplify = app.add_subcommand("simplify", "Minimize a formula");
  simplify->add_option("--formula", simplify_formula_text, "formula text")->required();
  simplify->add_option("--names", simplify_names, "comma-separated concept names")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (train->parsed()) {
      if (!data_opt.empty()) train_args.data = data_opt;
      if (!label_opt.empty()) train_args.label_column = label_opt;
      if (!model_opt.empty()) train_args.model = model_opt;
      if (lr_flag->count() > 0) train_args.lr = lr_opt;
      if (epochs_flag->count() > 0) train_args.epochs = epochs_opt;
      if (ew_flag->count() > 0) train_args.entropy_weight = ew_opt;
      if (!out_opt.empty()) train_args.out = out_opt;
      return run_train(train_args);
    }
    if (eval->parsed()) {
      return run_eval_formula(formula_text, eval_data, eval_class, eval_threshold,
                              eval_label_column);
    }
    if (simplify->parsed()) {
      return run_simplify(simplify_formula_text, simplify_names);
    }
  } catch (const lenkit::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const lenkit::TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTraining;
  } catch (const lenkit::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const lenkit::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad config: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
