// SPDX-License-Identifier: Apache-2.0

#include "dcca/error.hpp"

#include <utility>

namespace dcca {

Error::Error(std::string kind, ErrorCategory category, const std::string& message,
             int http_status)
    : std::runtime_error(message),
      kind_(std::move(kind)),
      category_(category),
      http_status_(http_status) {}

void throw_data(const std::string& kind, const std::string& message) {
  throw Error(kind, ErrorCategory::Data, message);
}

void throw_numerical(const std::string& kind, const std::string& message) {
  throw Error(kind, ErrorCategory::Numerical, message);
}

void throw_usage(const std::string& kind, const std::string& message) {
  throw Error(kind, ErrorCategory::Usage, message);
}

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Usage:
      return 1;
    case ErrorCategory::Data:
      return 2;
    case ErrorCategory::Numerical:
      return 3;
  }
  return 2;
}

}  // namespace dcca
