#pragma once

// Config-driven grids of scenario x policy x seed trials.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ftasl/harness.hpp"

namespace ftasl {

/// Overrides the configured output directory when set.
inline constexpr const char* kOutputRootEnv = "FTASL_OUTPUT_ROOT";

struct SuiteConfig {
  std::filesystem::path output_dir = "ftasl_out";
  std::size_t threads = 1;
  std::vector<std::uint64_t> seeds;
  /// Empty means log_checkpoints(T) per scenario.
  std::vector<std::size_t> checkpoints;
  ExperimentOptions options;
  std::vector<ScenarioSpec> scenarios;
  std::vector<PolicyDescriptor> policies;
};

/// YAML document; see README for the keys. Relative dataset paths resolve
/// against the config file's directory.
SuiteConfig load_suite_config(const std::filesystem::path& path);
SuiteConfig parse_suite_config(const std::string& yaml_text, const std::filesystem::path& base_dir = ".");

struct TrialFailure {
  std::string scenario;
  std::string policy;
  std::uint64_t seed = 0;
  std::string error;
};

struct SuiteOutcome {
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> result_files;
  std::vector<TrialFailure> failures;
};

/// Layout: <out>/<scenario>/<policy>/seed_<s>.jsonl plus .timing.jsonl,
/// <out>/<scenario>/regret.csv, exec_time.csv, <out>/summary.csv and
/// <out>/failures.jsonl. An empty grid writes nothing.
SuiteOutcome run_suite(const SuiteConfig& config);
SuiteOutcome run_suite(const std::filesystem::path& config_path);

}  // namespace ftasl
