// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dcca {

/// Coarse failure class; the CLI maps it onto its exit code.
enum class ErrorCategory {
  Usage,      // exit 1
  Data,       // exit 2
  Numerical,  // exit 3
};

/// Every failure raised by the library. `kind()` is the stable machine-readable
/// name ("AlignmentError", "SingularPA", ...) that ends up in CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, ErrorCategory category, const std::string& message,
        int http_status = 0);

  const std::string& kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_; }
  int http_status() const noexcept { return http_status_; }

 private:
  std::string kind_;
  ErrorCategory category_;
  int http_status_;
};

[[noreturn]] void throw_data(const std::string& kind, const std::string& message);
[[noreturn]] void throw_numerical(const std::string& kind, const std::string& message);
[[noreturn]] void throw_usage(const std::string& kind, const std::string& message);

int exit_code_for(ErrorCategory category);

}  // namespace dcca
