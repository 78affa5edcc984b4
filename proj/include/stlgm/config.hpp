#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stlgm/covariance.hpp"
#include "stlgm/evaluate.hpp"
#include "stlgm/samplers.hpp"

namespace stlgm {

enum class Stage { y, z };

std::string_view stage_name(Stage stage);

struct PredictSettings {
  std::filesystem::path region;
  std::filesystem::path mask;  // empty: every grid cell is masked in
  double spacing_km = 1.0;
  std::vector<double> years;
  std::vector<double> quantiles{0.025, 0.975};
  bool include_noise = true;
  std::uint64_t seed = 1;
  /// Change map from change[0] to change[1]; empty disables it.
  std::vector<double> change;
  /// Fit run directories holding posterior and w-draw files.
  std::filesystem::path y_run;
  std::filesystem::path z_run;

  friend bool operator==(const PredictSettings&, const PredictSettings&) = default;
};

struct CvSettings {
  std::size_t k = 10;
  std::uint64_t seed = 1;

  friend bool operator==(const CvSettings&, const CvSettings&) = default;
};

struct VariogramSettings {
  Stage stage = Stage::y;
  /// Explicit bin edges; when empty, evenly spaced bins are used.
  std::vector<double> space_edges;
  std::vector<double> time_edges;
  std::size_t space_bins = 10;
  std::size_t time_bins = 5;
  bool normalize = false;
  std::optional<double> space_cutoff;
  /// Fit run directory whose MAP draw gives the theoretical curve.
  std::filesystem::path posterior_run;

  friend bool operator==(const VariogramSettings&, const VariogramSettings&) = default;
};

struct RunConfig {
  std::filesystem::path data;
  int root = 3;
  std::size_t components = 2;
  std::size_t neighbors = 25;
  PriorSpec priors_y;
  PriorSpec priors_z;
  McmcConfig mcmc_y;
  McmcConfig mcmc_z;
  std::size_t chains = 1;
  PredictSettings predict;
  CvSettings cv;
  std::vector<CycleBounds> ht_cycles;
  VariogramSettings variogram;
  SimulationSpec simulate;

  const McmcConfig& mcmc(Stage stage) const { return stage == Stage::y ? mcmc_y : mcmc_z; }
  const PriorSpec& priors(Stage stage) const { return stage == Stage::y ? priors_y : priors_z; }
  RootTransform transform() const { return RootTransform(root); }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Default priors for the continuous and binary stages with one or two
/// components. Larger models must list their priors explicitly.
PriorSpec default_priors(Stage stage, std::size_t components);

/// Relative paths resolve against `base_dir`. Every problem in the document
/// is collected and reported in a single ValidationError.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical TOML with every field explicit and absolute paths; parsing it
/// yields an identical RunConfig.
std::string to_toml(const RunConfig& config);

/// 16 hex digits of FNV-1a over the canonical text.
std::string config_hash(const RunConfig& config);

enum class Command { fit, predict, cv, variogram, simulate, ht };

/// Fields a command consumes but that have no usable default.
void require_for(const RunConfig& config, Command command, std::optional<Stage> stage = std::nullopt);

}  // namespace stlgm
