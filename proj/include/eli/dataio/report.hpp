#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "eli/dataio/config.hpp"
#include "eli/numeric/matrix.hpp"

namespace eli::dataio {

using numeric::Matrix;

// Task-1 test accuracies in percent.
struct Accuracies {
  double pre_drift = 0.0;  // previous head o previous backbone
  double drifted = 0.0;    // previous head o current backbone
  double aligned = 0.0;    // previous head o align o current backbone
};

struct EnergyStats {
  double mean_in = 0.0;            // previous-extractor latents of the EBM training data
  double mean_out = 0.0;           // current-extractor latents of the same inputs
  double mean_before_align = 0.0;  // drifted task-1 test latents
  double mean_after_align = 0.0;   // the same latents after alignment
};

// 2-D projection of a set of latents.
struct LatentSnapshot {
  Matrix xy;                // [N x 2]
  std::vector<int> label;   // class per row
  std::vector<int> task;    // task id per row
};

struct AlignmentReport {
  KeyValues config;
  std::uint64_t seed = 0;
  Accuracies accuracy;
  EnergyStats energy;
  std::size_t eval_examples = 0;  // size of the task-1 test set behind the accuracies
  Matrix dim_delta;               // [D x l_steps]
  Matrix energy_trace;            // [rows x (l_steps + 1)]
  LatentSnapshot before;
  LatentSnapshot after;
  std::vector<std::pair<std::string, double>> stage_seconds;  // wall clock, run order
};

/// Writes report.json, latents_before.csv, latents_after.csv,
/// energy_trace.csv and dim_delta.csv into out_dir (created if missing).
/// CSV values use 6 significant digits. Timestamps and wall-clock figures
/// appear only in the "metadata" block of report.json.
void write_report(const AlignmentReport& report, const std::filesystem::path& out_dir);

// Reads report.json back (config, seed, accuracies, energy stats, counts).
// CSV contents are not loaded. Throws IoError / FormatError.
AlignmentReport read_report(const std::filesystem::path& dir);

// report.json without its metadata block, serialized compactly.
std::string report_json_without_metadata(const std::filesystem::path& dir);

inline constexpr const char* kReportFiles[] = {"report.json", "latents_before.csv",
                                               "latents_after.csv", "energy_trace.csv",
                                               "dim_delta.csv"};

}  // namespace eli::dataio
