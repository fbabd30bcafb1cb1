#include "dichlab/scenario.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::vector<std::string> split_formats(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string f; std::getline(in, f, ',');) {
    if (f != "json" && f != "csv") throw dichlab::ConfigError("--format", "unknown format '" + f + "'");
    out.push_back(f);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for (mu, nu)-dichotomies via admissibility"};
  std::string config_path;
  std::string scenario;
  std::string out_dir = "out";
  std::string format;
  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--config", config_path, "Scenario configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--scenario", scenario, "Override the configured scenario")
      ->check(CLI::IsMember({"verify", "characterize", "admissibility", "perturb", "counterexample", "sweep"}));
  app.add_option("--out-dir", out_dir, "Directory for report.json, timing.json and CSV tables");
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--format", format, "Comma separated subset of json,csv");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.set_version_flag("--version", dichlab::library_version());
  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(config_path);
    dichlab::Json config;
    try {
      config = dichlab::Json::parse(in);
    } catch (const dichlab::Json::parse_error& e) {
      throw dichlab::ConfigError(config_path, e.what());
    }
    dichlab::RunOptions opts;
    if (!scenario.empty()) opts.scenario = scenario;
    if (*seed_opt) opts.seed = seed;
    opts.threads = threads;
    opts.base_dir = std::filesystem::path(config_path).parent_path().string();
    if (opts.base_dir.empty()) opts.base_dir = ".";

    std::vector<std::string> formats{"json", "csv"};
    if (!format.empty()) {
      formats = split_formats(format);
    } else if (config.contains("output") && config["output"].contains("formats")) {
      formats = config["output"]["formats"].get<std::vector<std::string>>();
    }
    const dichlab::RunOutput out = dichlab::run_scenario(std::move(config), opts);
    dichlab::write_outputs(out, out_dir, formats);
    std::cout << out.report["scenario"].get<std::string>() << ": " << out.report["verdict"].get<std::string>();
    if (out.report.contains("error")) std::cout << " (" << out.report["error"]["message"].get<std::string>() << ")";
    std::cout << "\n";
    return out.exit_code;
  } catch (const dichlab::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
