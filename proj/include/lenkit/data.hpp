#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lenkit/matrix.hpp"

namespace lenkit {

// Concept activation matrix with integer class labels and name tables.
// Immutable after construction; activations live in [0, 1].
struct Dataset {
  Matrix x;                                // n x k
  std::vector<int> y;                      // n labels in [0, C)
  std::vector<std::string> concept_names;  // k
  std::vector<std::string> class_names;    // C

  std::size_t n_rows() const { return x.rows(); }
  std::size_t n_concepts() const { return x.cols(); }
  std::size_t n_classes() const { return class_names.size(); }
};

// Validates the Dataset invariants; throws DataError on violation.
void validate(const Dataset& dataset);

// CSV: UTF-8, comma separated, header row, one label column (integers or
// class-name strings), every other cell numeric in [0, 1]. Class names are
// the distinct labels, numerically sorted when all labels are integers,
// lexicographically otherwise.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column = "label");

// Writer counterpart of load_csv, used for fixtures and round trips.
void save_csv(const Dataset& dataset, const std::filesystem::path& path,
              const std::string& label_column = "label");

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// Seeded shuffle then contiguous partition. Fractions must be positive and
// sum to 1; a fraction that rounds to zero rows on nonempty data is an
// error.
Split split(const Dataset& dataset, const SplitFractions& fractions, std::uint64_t seed);

// Materializes the given rows as a new Dataset.
Dataset take(const Dataset& dataset, const std::vector<std::size_t>& rows);

// entry = value > threshold (strictly).
std::vector<std::vector<bool>> booleanize(const Matrix& x, double threshold);

std::vector<bool> booleanize_row(const Matrix& x, std::size_t row, double threshold);

}  // namespace lenkit
