#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cash {

// Root of the library's exception hierarchy.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid settings: malformed search spaces, bad experiment parameters.
struct ConfigError : Error {
  using Error::Error;
};

// Problems with input files or dataset contents.
struct DataError : Error {
  using Error::Error;
};

struct EmptyFile : DataError {
  explicit EmptyFile(const std::string& path) : DataError("no data rows in " + path) {}
};

struct MissingLabelColumn : DataError {
  explicit MissingLabelColumn(const std::string& column)
      : DataError("label column not found: " + column) {}
};

struct RaggedRow : DataError {
  explicit RaggedRow(std::size_t line_number)
      : DataError("row at line " + std::to_string(line_number) + " has wrong field count"),
        line(line_number) {}
  std::size_t line;
};

struct UnsupportedAttributeType : DataError {
  explicit UnsupportedAttributeType(const std::string& what_type)
      : DataError("unsupported attribute type: " + what_type) {}
};

struct ParseError : DataError {
  ParseError(std::size_t line_number, const std::string& detail)
      : DataError("parse error at line " + std::to_string(line_number) + ": " + detail),
        line(line_number) {}
  std::size_t line;
};

struct MissingValue : DataError {
  explicit MissingValue(std::size_t line_number)
      : DataError("missing value ('?') at line " + std::to_string(line_number)),
        line(line_number) {}
  std::size_t line;
};

struct TooFewInstances : DataError {
  explicit TooFewInstances(const std::string& detail) : DataError(detail) {}
};

struct KTooLarge : DataError {
  KTooLarge(int k, std::size_t n)
      : DataError("fold count " + std::to_string(k) + " exceeds instance count " +
                  std::to_string(n)) {}
};

struct ArityMismatch : DataError {
  ArityMismatch(std::size_t got, std::size_t expected)
      : DataError("instance has " + std::to_string(got) + " attributes, model expects " +
                  std::to_string(expected)) {}
};

struct CycleDetected : ConfigError {
  explicit CycleDetected(const std::string& cycle_path)
      : ConfigError("condition cycle: " + cycle_path), path(cycle_path) {}
  std::string path;
};

struct UnknownParent : ConfigError {
  explicit UnknownParent(const std::string& parent)
      : ConfigError("condition parent does not exist: " + parent), name(parent) {}
  std::string name;
};

struct NonCategoricalParent : ConfigError {
  explicit NonCategoricalParent(const std::string& parent)
      : ConfigError("condition parent is not categorical: " + parent), name(parent) {}
  std::string name;
};

struct DefaultOutOfDomain : ConfigError {
  explicit DefaultOutOfDomain(const std::string& param)
      : ConfigError("default value outside domain for parameter: " + param), name(param) {}
  std::string name;
};

struct InvalidDomain : ConfigError {
  explicit InvalidDomain(const std::string& detail) : ConfigError(detail) {}
};

// Raised by training when the instance-evaluation budget (or wall-clock
// timeout) is consumed; callers map it to a loss of 1.0.
struct BudgetExhausted : Error {
  BudgetExhausted() : Error("training budget exhausted") {}
};

struct MissingFold : Error {
  explicit MissingFold(int fold)
      : Error("no record for fold " + std::to_string(fold)), fold(fold) {}
  int fold;
};

struct LengthMismatch : Error {
  LengthMismatch(std::size_t a, std::size_t b)
      : Error("sequence lengths differ: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

struct EmptyInput : Error {
  explicit EmptyInput(const std::string& what_input) : Error("empty input: " + what_input) {}
};

struct TooFewObservations : Error {
  explicit TooFewObservations(std::size_t got)
      : Error("need at least 2 observations, got " + std::to_string(got)) {}
};

struct NonpositiveDensity : Error {
  NonpositiveDensity() : Error("density must be positive") {}
};

}  // namespace cash
