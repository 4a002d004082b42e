#pragma once

#include <stdexcept>
#include <string>

namespace sfwm {

// Error classes map one-to-one onto CLI exit codes:
//   config_error -> 3, model_error -> 4, extraction_error -> 5.

/// Configuration file / parameter validation failure (aggregated report).
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Numeric or physical-model domain violation.
class model_error : public std::runtime_error {
 public:
  explicit model_error(const std::string& what) : std::runtime_error(what) {}
};

/// Inverse-analysis failure (fit not extractable from the data).
class extraction_error : public std::runtime_error {
 public:
  explicit extraction_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sfwm
