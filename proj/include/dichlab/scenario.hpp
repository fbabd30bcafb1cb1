#pragma once

#include "dichlab/io.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dichlab {

const char* library_version();

struct RunOptions {
  std::optional<std::string> scenario;  // overrides the config
  std::optional<std::uint64_t> seed;    // overrides the config
  int threads = 1;
  std::string base_dir = ".";           // relative system files resolve here
};

struct RunOutput {
  Json report;
  std::vector<std::pair<std::string, CsvTable>> tables;  // file name, table
  int exit_code = 0;
  double wall_seconds = 0.0;
};

/// Validates the config, dispatches to the scenario and collects the report.
/// Throws ConfigError on schema or input errors (exit status 1). Analysis
/// failures are reported with exit status 2.
RunOutput run_scenario(Json config, const RunOptions& options = {});

/// report.json, timing.json and the CSV tables, each written atomically.
/// `formats` selects among "json" and "csv".
void write_outputs(const RunOutput& out, const std::string& dir, const std::vector<std::string>& formats);

}  // namespace dichlab
