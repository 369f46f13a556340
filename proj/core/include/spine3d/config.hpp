#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spine3d/grid.hpp"
#include "spine3d/phantom.hpp"
#include "spine3d/registration.hpp"
#include "spine3d/regressor.hpp"
#include "spine3d/training.hpp"

namespace spine3d {

struct DatasetConfig {
  int n_samples = 100;
  PhantomConfig phantom;
  RenderConfig render;
  double pgm_scale = 100.0;  // render intensities are stored as round(v * scale)
};

struct SplitConfig {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  double scoliosis_fraction = 0.2;
};

/// Perturbations injected into each (render, projection) pair before alignment.
struct AlignStageConfig {
  AlignConfig align;
  double perturb_theta_deg = 2.0;
  double perturb_shift_px = 10.0;
  double bend_fraction = 0.0;  // fraction of pairs that also receive a non-rigid bend
  double bend_amplitude_px = 0.0;
};

struct EvalConfig {
  double voxel_size_mm = kDefaultVoxelSizeMm;
  int figures = 4;  // per-sample overlay figures written by eval
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "spine3d_out";
  std::string run_name = "default";
  int threads = 1;
  DatasetConfig dataset;
  SplitConfig split;
  AlignStageConfig align;
  ModelConfig model;
  TrainConfig train;
  int folds = 5;
  bool cross_validate = false;
  std::vector<int> sweep_sizes;  // empty: no train-size sweep
  EvalConfig eval;

  /// Throws std::invalid_argument describing the first bad field.
  void validate() const;

  std::filesystem::path dataset_dir() const { return output_dir / "dataset"; }
  std::filesystem::path run_dir() const { return output_dir / "runs" / run_name; }
};

/// Plain-text config: `[section]` headers followed by `key = value` lines, `#`
/// comments. Keys outside any section belong to the top level. Unknown keys
/// and sections are an error. Missing keys keep their defaults; the result is
/// validated.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
/// Writes every key, so parse(format(c)) == c.
std::string format_experiment_config(const ExperimentConfig& cfg);

}  // namespace spine3d
