#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sandro {

/// Broad failure classes. The CLI maps each one to a distinct exit code and
/// prints the name in its machine-readable error record.
enum class ErrorCategory {
  kParse,
  kValidation,
  kInsufficientCorrespondences,
  kDegenerateGeometry,
  kConfig,
  kIo,
  kSolveFailed,
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kParse: return "parse";
    case ErrorCategory::kValidation: return "validation";
    case ErrorCategory::kInsufficientCorrespondences: return "insufficient_correspondences";
    case ErrorCategory::kDegenerateGeometry: return "degenerate_geometry";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kSolveFailed: return "solve_failed";
  }
  return "unknown";
}

inline int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kParse: return 2;
    case ErrorCategory::kValidation: return 3;
    case ErrorCategory::kInsufficientCorrespondences: return 4;
    case ErrorCategory::kDegenerateGeometry: return 5;
    case ErrorCategory::kConfig: return 6;
    case ErrorCategory::kIo: return 7;
    case ErrorCategory::kSolveFailed: return 8;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace sandro
