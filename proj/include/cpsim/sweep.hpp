#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cpsim/config.hpp"
#include "cpsim/textio.hpp"

// Named sweeps over one independent variable, written as CSV with columns
// axis_value, repetition, status, then metrics.
namespace cpsim::sweep {

std::vector<std::string> preset_names();
// Throws kValidation for an unknown name.
SweepSpec preset(const std::string& name);

// The config's sweeps, or every preset when it lists none.
std::vector<SweepSpec> resolve(const RunConfig& cfg);

// Metric column names for a spec, in output order.
std::vector<std::string> metric_columns(const SweepSpec& spec);

// Runs every (value, repetition) point on up to cfg.workers threads. A point
// that throws becomes a row whose status is the error code and whose metric
// cells are empty. Rows are in value-major, repetition-minor order.
CsvTable run_sweep(const RunConfig& cfg, const SweepSpec& spec);

// Runs `specs` and writes <dir>/<name>.csv for each. Returns the paths.
std::vector<std::filesystem::path> run_to_directory(const RunConfig& cfg,
                                                    const std::vector<SweepSpec>& specs,
                                                    const std::filesystem::path& dir);

// Per axis value: n_ok, n_failed and <metric>_mean / <metric>_sd over ok rows.
CsvTable summarize(const CsvTable& sweep);

// Plain-text table of a summary. Latency and camera-subset sweeps get their
// own column selection; everything else shows every metric.
std::string render(const std::string& name, const CsvTable& summary);

}  // namespace cpsim::sweep
