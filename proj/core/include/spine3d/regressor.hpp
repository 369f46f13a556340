#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spine3d/curves.hpp"
#include "spine3d/grid.hpp"
#include "spine3d/random.hpp"

namespace spine3d {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
// Eigen picks its vectorized summation order from buffer alignment, so parameter
// and gradient storage is over-aligned to keep results independent of the heap.
using AlignedBuffer = std::vector<double, Eigen::aligned_allocator<double>>;

struct ConvStage {
  int channels = 8;
  int stride = 2;
  bool operator==(const ConvStage&) const = default;
};

/// Architecture of the image-to-curves network:
///   3x3 conv stages (ReLU) -> g x g x D feature grid -> g^2 tokens ->
///   one multi-head self-attention layer with learned 2D relative position
///   biases (residual) -> mean pool over tokens -> dropout -> linear head.
struct ModelConfig {
  int input_size = 224;
  std::vector<ConvStage> conv_stages{{8, 2}, {16, 2}, {32, 2}, {64, 2}, {128, 2}};
  int attn_heads = 4;
  bool use_attention = true;
  bool use_pos_encoding = true;
  // Appends normalized x/z coordinate maps to the input so pooled features can
  // carry absolute position.
  bool coord_channels = true;
  double dropout_p = 0.3;
  double input_scale = 1.0 / 32.0;
  int out_levels = kLevels;
  int out_curves = kCurves;

  int input_channels() const { return coord_channels ? 3 : 1; }
  int feature_dim() const { return conv_stages.empty() ? input_channels() : conv_stages.back().channels; }
  int grid_size() const;
  int token_count() const { return grid_size() * grid_size(); }
  int outputs() const { return out_levels * out_curves; }
  /// Throws std::invalid_argument describing the first inconsistency.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Offsets of every parameter block inside the flat parameter vector.
struct ParamLayout {
  struct Conv {
    std::size_t w = 0;  // (9 * cin) x cout, row-major; rows ordered (ky, kx, cin)
    std::size_t b = 0;  // cout
    int cin = 0;
    int cout = 0;
    int stride = 1;
    int in_size = 0;
    int out_size = 0;
  };
  std::vector<Conv> conv;
  std::size_t wq = 0, wk = 0, wv = 0, wo = 0;  // D x D each
  std::size_t bq = 0, bk = 0, bv = 0, bo = 0;  // D each
  std::size_t rel_row = 0, rel_col = 0;        // heads x (2g - 1) each
  std::size_t wh = 0;                          // D x outputs
  std::size_t bh = 0;                          // outputs
  std::size_t total = 0;
};

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

class RegressorModel {
 public:
  explicit RegressorModel(ModelConfig cfg = {});

  const ModelConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }
  /// Parameter blocks in declaration order.
  std::vector<ParamBlock> blocks() const;

  /// Fan-in scaled uniform weights, zero biases and zero position biases.
  void initialize(std::uint64_t seed);

  /// Fixed (non-trainable) per-output offset added after the head, level-major.
  /// Holding the mean target here keeps the trained head bias near zero, so the
  /// weight penalty does not pull predictions towards the origin.
  std::span<const double> output_offset() const { return offset_; }
  void set_output_offset(std::span<const double> offset);

  bool all_finite() const;

 private:
  ModelConfig cfg_;
  ParamLayout layout_;
  AlignedBuffer params_;
  std::vector<double> offset_;
};

enum class Mode { Eval, Train };

/// Activations recorded by a forward pass, consumed by backward().
struct ForwardTape {
  std::vector<RowMat> cols;  // im2col matrix per conv stage
  std::vector<RowMat> acts;  // post-ReLU output per conv stage
  RowMat tokens;             // N x D attention input
  RowMat q, k, v;            // N x D
  std::vector<RowMat> probs; // per head, N x N
  RowMat attn;               // N x D, concatenated head outputs
  RowMat y;                  // N x D, attention block output
  RowVec pooled;             // 1 x D
  RowVec drop_scale;         // 1 x D, 0 or 1/(1-p); all ones in eval mode
  RowVec dropped;            // 1 x D
};

/// Runs the network on a input_size x input_size image and returns outputs in
/// level-major order (out_levels x out_curves). Train mode samples dropout from
/// `dropout_rng`; eval mode is deterministic. Non-finite input throws.
std::vector<double> forward(const RegressorModel& model, const Image2D& image, Mode mode,
                            ForwardTape* tape = nullptr, Rng* dropout_rng = nullptr);

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(outputs).
void backward(const RegressorModel& model, const ForwardTape& tape, std::span<const double> d_out,
              std::span<double> grad);

/// Mean of |pred - target| over all entries plus penalty * sum(params^2).
double l1_loss(std::span<const double> pred, std::span<const double> target, const RegressorModel& model,
               double penalty);
/// Data term only.
double l1_data_loss(std::span<const double> pred, std::span<const double> target);
/// d(data term)/d(pred): sign(pred - target) / n, with sign(0) = 0.
std::vector<double> l1_loss_grad(std::span<const double> pred, std::span<const double> target);
/// Adds 2 * penalty * params to `grad`.
void add_penalty_grad(const RegressorModel& model, double penalty, std::span<double> grad);

/// Attention block followed by mean pooling, applied to a N x D token matrix
/// (row-major). Token i sits at grid position (i / g, i % g).
std::vector<double> attention_pooled(const RegressorModel& model, std::span<const double> tokens);

/// Eval-mode forward, clamped to the frame and sorted per level and plane so
/// the result always satisfies the CurveSet invariants.
CurveSet predict_curveset(const RegressorModel& model, const Image2D& image);
/// The ordering/clamping step of predict_curveset on raw level-major outputs.
CurveSet curveset_from_outputs(std::span<const double> outputs);
/// Level-major flattening of a CurveSet (inverse of the layout above).
std::vector<double> flatten(const CurveSet& curves);

}  // namespace spine3d
