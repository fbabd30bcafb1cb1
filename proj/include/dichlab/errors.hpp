#pragma once

#include <stdexcept>
#include <string>

namespace dichlab {

/// The numerics decided against the input: no exponent gap, a singular
/// kernel restriction, a degenerate splitting. Distinct from bad arguments,
/// which are reported with std::invalid_argument.
class AnalysisError : public std::runtime_error {
 public:
  AnalysisError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

  [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Configuration rejected before any computation ran. `path` is a JSON
/// pointer-like location such as "$.rate.window".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}

  [[nodiscard]] const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace dichlab
