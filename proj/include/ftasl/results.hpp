#pragma once

// Line-delimited JSON persistence of experiment results and CSV plot tables.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ftasl/harness.hpp"

namespace ftasl {

inline constexpr int kResultSchemaVersion = 1;

/// Writes every numeric field except wall times. Reruns of the same trial
/// produce byte-identical files.
void write_result_file(const std::filesystem::path& path, const ExperimentResult& result);
/// Wall-time companion file: one record holding the per-round cumulative times.
void write_timing_file(const std::filesystem::path& path, const ExperimentResult& result);

/// Inverse of write_result_file; merges a timing file when one is given.
ExperimentResult read_result_file(const std::filesystem::path& path,
                                  const std::optional<std::filesystem::path>& timing = std::nullopt);

/// Sibling timing path used by the suite: seed_3.jsonl -> seed_3.timing.jsonl.
std::filesystem::path timing_path_for(const std::filesystem::path& result_path);

/// Writes a stream (phi, then one record per round) as JSONL.
void write_stream_file(const std::filesystem::path& path, const ScenarioSpec& spec, const Stream& stream);

enum class PlotKind { RegretVsTime, ExecTimeVsT };

std::string_view to_string(PlotKind kind);
PlotKind parse_plot_kind(std::string_view text);

/// Tidy CSV with header "policy,t,value,seed". RegretVsTime writes R_hat_t / t,
/// ExecTimeVsT the cumulative wall time in seconds. Checkpoints default to
/// log_checkpoints(T) of each result.
void emit_plot_data(std::span<const ExperimentResult> results, PlotKind kind, const std::filesystem::path& path,
                    std::span<const std::size_t> checkpoints = {});

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace ftasl
