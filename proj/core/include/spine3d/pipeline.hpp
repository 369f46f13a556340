#pragma once

#include <array>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "spine3d/config.hpp"
#include "spine3d/curves.hpp"
#include "spine3d/dataset.hpp"
#include "spine3d/metrics.hpp"
#include "spine3d/regressor.hpp"
#include "spine3d/training.hpp"

namespace spine3d {

/// Target blocks of the evaluation table, in report order.
inline constexpr std::array<const char*, 3> kTargets{"dxa", "coronal", "sagittal"};

struct SampleEval {
  std::string id;
  std::array<double, 3> mae{};    // per target block
  std::array<double, 3> re{};
  std::array<double, 3> iou2d{};
  double iou3d = 0.0;
  double deviation_voxels = 0.0;
};

struct EvalResult {
  std::vector<MetricReport> reports;  // one per target block
  std::vector<SampleEval> samples;
};

/// Scores predicted curve sets against references. The dxa block compares the
/// coronal curves with the input image's own spine mask curves; for phantoms that
/// mask is the coronal projection, so the dxa and coronal blocks coincide.
/// 3D IoU, mAP and centreline deviation use the reconstructed volume and appear
/// in every block.
EvalResult evaluate_curves(const std::vector<std::string>& ids, const std::vector<CurveSet>& predicted,
                           const std::vector<CurveSet>& reference, const std::vector<VoxelMask>& volumes,
                           double voxel_size_mm, int threads = 1);

/// Per-level mean of the training targets as a curve set (the comparison floor).
CurveSet mean_curve_baseline(const std::vector<TrainSample>& train_set);

std::vector<TrainSample> to_train_samples(const std::filesystem::path& dataset_dir,
                                          const std::vector<SampleRecord>& records, int threads = 1);

/// Model with fan-in initialization and the output offset set to the mean target.
RegressorModel make_initial_model(const ExperimentConfig& cfg, const std::vector<TrainSample>& train_set);
/// The configured training recipe with seed and thread count taken from the experiment.
TrainConfig effective_train_config(const ExperimentConfig& cfg);

// Stage commands. Each reads what earlier stages wrote under cfg.output_dir and
// logs progress to `log` when non-null.

DatasetManifest cmd_generate(const ExperimentConfig& cfg, std::ostream* log = nullptr);

struct AlignSummary {
  int pairs = 0;
  int accepted = 0;
  double rejection_rate = 0.0;
};
AlignSummary cmd_align(const ExperimentConfig& cfg, std::ostream* log = nullptr);

TrainHistory cmd_train(const ExperimentConfig& cfg, std::ostream* log = nullptr);

EvalResult cmd_eval(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Reconstructs volumes for the listed sample ids (all test samples when empty).
void cmd_reconstruct(const ExperimentConfig& cfg, const std::vector<std::string>& ids, std::ostream* log = nullptr);
/// Reconstructs one curve CSV into a volume file plus an SVG next to it.
void reconstruct_curves_file(const std::filesystem::path& curves_csv, const std::filesystem::path& volume_out,
                             double voxel_size_mm);

/// Writes summary.txt for the run from the eval CSVs and returns its text.
std::string cmd_report(const ExperimentConfig& cfg, std::ostream* log = nullptr);

}  // namespace spine3d
