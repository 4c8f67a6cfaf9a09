#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mmb {

// Shapes that do not fit an operation's shape algebra.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller violated an operation's precondition.
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN or Inf observed in a forward value or a gradient.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A metric is undefined for its input (e.g. AUC on a single class).
struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed binary file; carries the byte offset where parsing failed.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " at byte offset " + std::to_string(offset)), offset(offset) {}
  std::uint64_t offset;
};

struct DigestMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mmb
