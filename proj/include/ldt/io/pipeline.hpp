#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ldt/io/run_config.hpp"

namespace ldt::io {

struct PipelineOptions {
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

/// Stage names in execution order. `estimate` folds the spectrum (and, when
/// enabled, Riccati) results into tail/density numbers.
inline const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages = {"instanton", "spectrum", "riccati",
                                                  "estimate", "tube", "sample"};
  return stages;
}

/// Runs one stage (and whatever cached upstream artifacts it needs).
/// Stage artifacts are keyed by config-subtree hashes: rerunning with a
/// changed spectrum section reuses the stored instanton.
void run_stage(const RunConfig& cfg, const PipelineOptions& opt, const std::string& stage);

/// All enabled stages in order, then the aggregated manifest.
void run_pipeline(const RunConfig& cfg, const PipelineOptions& opt);

/// Plot-ready CSV exports from stored artifacts:
///   eigen_decay, det_convergence, tail_vs_z, tube_slices, rate_sweep.
void export_plot_data(const std::filesystem::path& out_dir, const std::string& which);

}  // namespace ldt::io
