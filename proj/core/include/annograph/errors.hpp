#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace annograph {

// Invalid configuration or malformed input data. CLI maps this to exit 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Annotation backend failed after retries. CLI maps this to exit 3.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Live-run dollar cap reached; the annotation cache stays intact. Exit 4.
class BudgetCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using WarningSink = std::vector<std::string>;

}  // namespace annograph
