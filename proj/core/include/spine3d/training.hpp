#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spine3d/grid.hpp"
#include "spine3d/regressor.hpp"

namespace spine3d {

/// Non-finite loss or parameters during training.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AugmentConfig {
  bool enabled = true;
  int crop_jitter_px = 8;
  double contrast_min = 0.8;
  double contrast_max = 1.2;
  double noise_frac = 0.02;  // noise sigma as a fraction of the image maximum
};

struct TrainConfig {
  int epochs = 500;
  int batch_size = 16;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int lr_decay_every = 200;
  double lr_decay_factor = 0.1;
  double weight_penalty = 1e-5;
  AugmentConfig augment;
  std::uint64_t seed = 1;
  int threads = 1;

  /// Throws std::invalid_argument describing the first bad field.
  void validate() const;
  /// Learning rate in effect during `epoch` (0-based).
  double lr_at(int epoch) const;
};

/// One training pair: a crop-frame image and its level-major target
/// (out_levels x out_curves, see flatten()).
struct TrainSample {
  std::string id;
  Image2D image;
  std::vector<double> target;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation set
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

/// Called after every epoch; returning false stops training early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Randomly shifts the image by up to `crop_jitter_px` on each axis (zero
/// padded), scales contrast and adds Gaussian noise. The target is moved with
/// the image: x coordinates by the column shift, levels by the row shift.
void augment_sample(Image2D& image, std::vector<double>& target, int out_curves, const AugmentConfig& cfg, Rng& rng);

/// Per-output mean of the targets; a natural initial head bias and the
/// per-level mean-curve baseline.
std::vector<double> mean_target(const std::vector<TrainSample>& samples);

/// Mean L1 data loss of eval-mode predictions over `samples`.
double evaluate_loss(const RegressorModel& model, const std::vector<TrainSample>& samples, int threads = 1);

/// Shuffled minibatch training with Adam. Per-sample gradients are reduced in
/// batch order, so results do not depend on `threads`. Augmentation and dropout
/// draw from streams derived from (seed, epoch, sample index).
TrainHistory train(RegressorModel& model, const std::vector<TrainSample>& train_set,
                   const std::vector<TrainSample>& val_set, const TrainConfig& cfg,
                   const EpochCallback& on_epoch = {});

/// CSV with header epoch,train_loss,val_loss,lr.
std::string format_history_csv(const TrainHistory& history);
TrainHistory parse_history_csv(const std::string& text);

}  // namespace spine3d
