#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lenkit {

// Shape disagreement between matrices/layers.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Value outside its documented domain (labels, concept activations, ...).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Enumeration request beyond the supported variable count.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable dataset file.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No usable explanation could be extracted for a class.
class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Formula text rejected; position() is the byte offset of the problem.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : std::runtime_error(message + " at offset " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

}  // namespace lenkit
