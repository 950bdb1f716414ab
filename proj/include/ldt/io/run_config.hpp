#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldt/instanton.hpp"
#include "ldt/problems/kdv.hpp"
#include "ldt/riccati.hpp"
#include "ldt/sampling.hpp"
#include "ldt/spectrum.hpp"

namespace ldt::io {

/// Validated run description. Parsing rejects unknown keys, wrong types and
/// out-of-range values with config_error.
struct RunConfig {
  // problem
  std::string problem_type;  // "model2d" | "ou" | "kdv"
  double ou_kappa = 1.0;
  KdvConfig kdv;

  // grid
  int n_steps = 0;
  double horizon = 1.0;

  std::vector<double> z_values;   // ascending; single entry for point runs
  std::vector<double> epsilons;

  InstantonConfig instanton;

  bool spectrum_enabled = true;
  SpectrumConfig spectrum;

  bool riccati_enabled = false;
  RiccatiConfig riccati;

  bool tube_enabled = false;
  std::vector<double> tube_times;  // slice times for marginals

  bool sampling_direct = false;
  bool sampling_importance = false;
  McConfig sampling;

  std::uint64_t seed = 1;
  int threads = 1;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& file);
  nlohmann::json to_json() const;

  /// Canonical serialization (sorted keys, round-trip-exact numbers) and its
  /// FNV-1a hash; stable under input key reordering.
  std::string canonical() const;
  std::uint64_t hash() const;
  /// Hash of one stage's relevant subtree (plus its upstream dependencies),
  /// used for stage-level caching.
  std::uint64_t stage_hash(const std::string& stage) const;
};

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace ldt::io
