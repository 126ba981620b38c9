#include "lenkit/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lenkit/errors.hpp"
#include "lenkit/rng.hpp"

namespace lenkit {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

bool is_integer_literal(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  return true;
}

}  // namespace

void validate(const Dataset& dataset) {
  if (dataset.x.cols() != dataset.concept_names.size()) {
    throw DataError("concept name table size " + std::to_string(dataset.concept_names.size()) +
                    " does not match " + std::to_string(dataset.x.cols()) + " columns");
  }
  if (dataset.y.size() != dataset.x.rows()) {
    throw DataError("label count does not match row count");
  }
  std::set<std::string> names(dataset.concept_names.begin(), dataset.concept_names.end());
  if (names.size() != dataset.concept_names.size()) {
    throw DataError("duplicate concept names");
  }
  std::set<std::string> classes(dataset.class_names.begin(), dataset.class_names.end());
  if (classes.size() != dataset.class_names.size()) {
    throw DataError("duplicate class names");
  }
  for (int label : dataset.y) {
    if (label < 0 || static_cast<std::size_t>(label) >= dataset.class_names.size()) {
      throw DataError("label " + std::to_string(label) + " outside the class table");
    }
  }
  for (std::size_t i = 0; i < dataset.x.rows(); ++i) {
    for (std::size_t j = 0; j < dataset.x.cols(); ++j) {
      double v = dataset.x.at(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError("concept value " + std::to_string(v) + " at row " + std::to_string(i) +
                        ", column '" + dataset.concept_names[j] + "' lies outside [0, 1]");
      }
    }
  }
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);
  std::size_t label_col = header.size();
  std::vector<std::string> concept_names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == label_column) {
      if (label_col != header.size()) {
        throw DataError("label column '" + label_column + "' appears more than once");
      }
      label_col = j;
    } else {
      concept_names.push_back(header[j]);
    }
  }
  if (label_col == header.size()) {
    throw DataError("label column '" + label_column + "' not found in header");
  }
  {
    std::set<std::string> unique(concept_names.begin(), concept_names.end());
    if (unique.size() != concept_names.size()) throw DataError("duplicate concept names");
  }

  std::vector<double> values;
  std::vector<std::string> raw_labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      std::string cell = trim(cells[j]);
      if (j == label_col) {
        raw_labels.push_back(cell);
        continue;
      }
      double v = 0.0;
      if (!parse_double(cell, v)) {
        throw DataError("line " + std::to_string(line_no) + ", column '" + header[j] +
                        "': '" + cell + "' is not numeric");
      }
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError("line " + std::to_string(line_no) + ", column '" + header[j] +
                        "': value " + cell + " lies outside [0, 1]");
      }
      values.push_back(v);
    }
  }
  if (raw_labels.empty()) throw DataError("'" + path.string() + "' has a header but no rows");

  // Class table: distinct labels, numeric order when everything is an
  // integer so label "0" lands at index 0.
  std::vector<std::string> class_names(raw_labels);
  std::sort(class_names.begin(), class_names.end());
  class_names.erase(std::unique(class_names.begin(), class_names.end()), class_names.end());
  const bool all_int = std::all_of(class_names.begin(), class_names.end(), is_integer_literal);
  if (all_int) {
    std::sort(class_names.begin(), class_names.end(), [](const auto& a, const auto& b) {
      return std::stoll(a) < std::stoll(b);
    });
  }
  std::map<std::string, int> class_index;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    class_index[class_names[c]] = static_cast<int>(c);
  }

  Dataset dataset;
  dataset.concept_names = std::move(concept_names);
  dataset.class_names = std::move(class_names);
  dataset.x = Matrix(raw_labels.size(), dataset.concept_names.size());
  dataset.x.values() = std::move(values);
  dataset.y.reserve(raw_labels.size());
  for (const std::string& label : raw_labels) dataset.y.push_back(class_index[label]);
  validate(dataset);
  return dataset;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path,
              const std::string& label_column) {
  validate(dataset);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const std::string& name : dataset.concept_names) out << name << ',';
  out << label_column << '\n';
  char buf[64];
  for (std::size_t i = 0; i < dataset.n_rows(); ++i) {
    for (std::size_t j = 0; j < dataset.n_concepts(); ++j) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), dataset.x.at(i, j));
      out.write(buf, ptr - buf);
      out << ',';
    }
    out << dataset.class_names[static_cast<std::size_t>(dataset.y[i])] << '\n';
  }
}

Split split(const Dataset& dataset, const SplitFractions& fractions, std::uint64_t seed) {
  const double sum = fractions.train + fractions.validation + fractions.test;
  if (fractions.train <= 0.0 || fractions.validation <= 0.0 || fractions.test <= 0.0) {
    throw DomainError("split fractions must be positive");
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DomainError("split fractions sum to " + std::to_string(sum) + ", expected 1");
  }
  const std::size_t n = dataset.n_rows();
  if (n == 0) throw DomainError("cannot split an empty dataset");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(order[i], order[j]);
  }

  const auto n_train = static_cast<std::size_t>(std::llround(fractions.train * n));
  const auto n_val = static_cast<std::size_t>(std::llround(fractions.validation * n));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw DomainError("split of " + std::to_string(n) + " rows leaves an empty part");
  }
  Split s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.validation.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test.assign(order.begin() + n_train + n_val, order.end());
  return s;
}

Dataset take(const Dataset& dataset, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.concept_names = dataset.concept_names;
  out.class_names = dataset.class_names;
  out.x = Matrix(rows.size(), dataset.n_concepts());
  out.y.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= dataset.n_rows()) throw DomainError("row index out of range");
    for (std::size_t j = 0; j < dataset.n_concepts(); ++j) {
      out.x.at(i, j) = dataset.x.at(rows[i], j);
    }
    out.y.push_back(dataset.y[rows[i]]);
  }
  return out;
}

std::vector<std::vector<bool>> booleanize(const Matrix& x, double threshold) {
  std::vector<std::vector<bool>> out;
  out.reserve(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out.push_back(booleanize_row(x, i, threshold));
  return out;
}

std::vector<bool> booleanize_row(const Matrix& x, std::size_t row, double threshold) {
  std::vector<bool> out(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double v = x.at(row, j);
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("concept value " + std::to_string(v) + " lies outside [0, 1]");
    }
    out[j] = v > threshold;
  }
  return out;
}

}  // namespace lenkit
