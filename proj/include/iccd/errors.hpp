#pragma once

#include <stdexcept>
#include <string>

namespace iccd {

// Shape or dimension mismatch between tensor operands.
class DimensionError : public std::runtime_error {
public:
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// A documented precondition of an operation was violated by the caller.
class ContractError : public std::invalid_argument {
public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite values, degenerate embeddings, or other numeric failures.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failures; carries the offending path in the message.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace iccd
