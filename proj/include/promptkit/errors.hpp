#pragma once

#include <stdexcept>
#include <string>

namespace promptkit {

// Error taxonomy mirrored by the CLI exit codes: validation (2), data (3),
// adapter (4). Everything else exits 1.
enum class ErrorCategory { validation, data, adapter };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

// Bad arguments, broken preconditions, malformed configuration.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorCategory::validation, message) {}
};

// Missing or malformed input files and datasets.
class DataError : public Error {
 public:
  explicit DataError(const std::string& message)
      : Error(ErrorCategory::data, message) {}
};

// Failures inside a language-model adapter (tokenization, numerics).
class AdapterError : public Error {
 public:
  explicit AdapterError(const std::string& message)
      : Error(ErrorCategory::adapter, message) {}
};

// Soft-prompt transfer across differing embedding widths. This is the
// documented failure mode of cross-model vector transfer, not a bug.
class DimensionMismatchError : public ValidationError {
 public:
  DimensionMismatchError(std::size_t source_dim, std::size_t target_dim)
      : ValidationError("soft prompt dimension " + std::to_string(source_dim) +
                        " does not match target embedding dimension " +
                        std::to_string(target_dim)) {}
};

}  // namespace promptkit
