#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "spine3d/grid.hpp"

namespace spine3d {

/// Invalid or unsatisfiable phantom parameters.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Cross-section centre coordinates. kCenterX is the coordinate of pixel index 112,
// which makes the crop window rule below land the spine on a fixed crop position.
inline constexpr double kCenterX = 113.0;
inline constexpr double kCenterY = 112.5;
// Crop row of level index 0 (levels occupy crop rows 8..216).
inline constexpr int kCropRowOffset = 8;
inline constexpr int kCropSize = 224;
inline constexpr int kScannerRows = 832;
inline constexpr int kScannerCols = 320;

struct PhantomParams {
  int num_coronal_modes = 0;
  std::vector<double> coronal_amplitudes;  // px, >= 0
  std::vector<double> coronal_phases;      // radians
  std::vector<double> sagittal_amplitudes;
  std::vector<double> sagittal_phases;
  double sagittal_offset = 0.0;  // constant lordosis offset, px
  double radius_base_lat = 15.0;
  double radius_base_ap = 12.0;
  double radius_wobble = 1.0;
  double wobble_phase = 0.0;
  int rib_count = 12;
  std::uint64_t seed = 0;

  bool operator==(const PhantomParams&) const = default;
};

/// Sampling ranges for random phantoms plus the generator's acceptance rules.
struct PhantomConfig {
  std::vector<double> coronal_amplitude_max{14.0, 6.0, 3.0};
  std::vector<double> sagittal_amplitude_max{10.0, 4.0};
  double sagittal_offset_max = 8.0;
  double radius_lat_min = 14.0;
  double radius_lat_max = 19.0;
  double ap_ratio = 0.8;
  double wobble_min = 0.5;
  double wobble_max = 1.5;
  int rib_count = 12;
  double margin_px = 4.0;
  // 80th percentile of max lateral deviation over the default sampler
  // (see tools/calibrate_scoliosis.cpp); yields ~20% positive labels.
  double scoliosis_threshold = 12.4978;
  int max_attempts = 100;
};

struct SpinePhantom {
  std::vector<double> cx;  // centreline x(z), 1-based px, kLevels samples
  std::vector<double> cy;  // centreline y(z)
  std::vector<double> a;   // lateral semi-axis
  std::vector<double> b;   // antero-posterior semi-axis
  bool scoliosis_label = false;
  PhantomParams params;

  double max_lateral_deviation() const;
};

/// Deterministic in `params`. Throws ParameterError when parameters are
/// malformed or the cross-section leaves the grid margin.
SpinePhantom generate_phantom(const PhantomParams& params, const PhantomConfig& cfg = {});

/// Draws parameters for `seed` from the configured ranges (no validation).
PhantomParams sample_phantom_params(const PhantomConfig& cfg, std::uint64_t seed, int attempt = 0);

/// Samples until the margin invariant holds; ParameterError after cfg.max_attempts.
SpinePhantom sample_phantom(const PhantomConfig& cfg, std::uint64_t seed);

/// Voxel (z,x,y) is set iff its centre lies inside the level's ellipse.
VoxelMask rasterize(const SpinePhantom& phantom, double voxel_size_mm = kDefaultVoxelSizeMm);

enum class Plane { Coronal, Sagittal };

/// Coronal: (z, x) pixel set iff any voxel along y is set. Sagittal: (z, y) along x.
Mask2D project(const VoxelMask& mask, Plane plane);

/// Sum of voxels along the projection axis (the "MRI" coronal/sagittal projection image).
Image2D sum_projection(const VoxelMask& mask, Plane plane);

struct RenderConfig {
  double mu = 1.0;
  // Relative attenuation change per kCross voxels of depth; 0 gives a plain line
  // integral. Weights are clamped at 0.
  double depth_gain = 3.0;
  bool ribs = true;
  double rib_mu = 3.0;
  double rib_span = 56.0;
  double rib_thickness = 1.5;
  double rib_drop = 14.0;
  double rib_bulge = 6.0;
  double rib_depth_coupling = 0.6;
  double rib_tangent_coupling = 20.0;
  double noise_sigma = 0.5;
};

struct CropMeta {
  int scanner_rows = kScannerRows;
  int scanner_cols = kScannerCols;
  int row0 = 0;  // crop origin in the scanner frame
  int col0 = 0;
};

struct PseudoDxaImage {
  Image2D grid;  // kCropSize x kCropSize, rows = z, cols = x
  CropMeta crop;
};

/// Crop origin of a kCropSize window centred on the midpoint of the spine's endpoints.
CropMeta crop_from_endpoints(double top_row, double top_col, double bottom_row, double bottom_col);

/// Where the phantom sits on the nominal scanner frame; derived from the phantom seed.
CropMeta scanner_crop(const SpinePhantom& phantom);

PseudoDxaImage render_pseudo_dxa(const SpinePhantom& phantom, const VoxelMask& mask,
                                 const RenderConfig& cfg = {});
PseudoDxaImage render_pseudo_dxa(const SpinePhantom& phantom, const RenderConfig& cfg = {});

/// Places a kLevels-row projection into the kCropSize x kCropSize crop frame.
Mask2D to_crop_frame(const Mask2D& levels_mask);
Image2D to_crop_frame(const Image2D& levels_image);
/// Inverse of to_crop_frame: rows kCropRowOffset .. kCropRowOffset + kLevels - 1.
Mask2D from_crop_frame(const Mask2D& crop_mask);

void write_phantom_params(const std::filesystem::path& path, const PhantomParams& params);
PhantomParams read_phantom_params(const std::filesystem::path& path);

}  // namespace spine3d
