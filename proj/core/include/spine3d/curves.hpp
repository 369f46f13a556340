#pragma once

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "spine3d/grid.hpp"

namespace spine3d {

/// Lower bound, centre and upper bound of one projection, one value per row.
/// Coronal: lo = right bound (x1), hi = left bound (x3), since x grows right to left.
/// Sagittal: lo = anterior (y1), hi = posterior (y3).
struct PlaneCurves {
  std::vector<double> lo;
  std::vector<double> mid;
  std::vector<double> hi;

  std::size_t size() const { return mid.size(); }
  bool operator==(const PlaneCurves&) const = default;
};

/// The six regressed curves sampled at z = 1..kLevels.
struct CurveSet {
  PlaneCurves coronal;   // x1, x2, x3
  PlaneCurves sagittal;  // y1, y2, y3

  static CurveSet zeros();
  /// Curve k in column order x1,x2,x3,y1,y2,y3.
  std::vector<double>& curve(int k);
  const std::vector<double>& curve(int k) const;

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;
  bool valid() const noexcept;

  bool operator==(const CurveSet&) const = default;
};

class NoSpineError : public std::runtime_error {
 public:
  NoSpineError() : std::runtime_error("no spine") {}
};

/// Per-row extrema and mean of set columns (1-based coordinates). Rows without
/// set pixels are filled by linear interpolation / extrapolation from the
/// nearest occupied rows. Throws NoSpineError for an empty mask.
PlaneCurves curves_from_mask(const Mask2D& mask);

/// Linear resampling of a curve triple onto kLevels rows (or `levels`).
PlaneCurves normalize_height(const PlaneCurves& raw, int levels = kLevels);
std::vector<double> normalize_height(const std::vector<double>& raw, int levels = kLevels);

/// Row z has columns round(lo[z]) .. round(hi[z]) set (1-based coordinates).
Mask2D mask_from_lateral_curves(const std::vector<double>& lo, const std::vector<double>& hi,
                                int cols = kCross);

/// Ground-truth curve set from a rasterized phantom volume.
CurveSet curves_from_volume(const VoxelMask& mask);

/// CSV: header x1,x2,x3,y1,y2,y3 then one row per level, 4 decimal places.
std::string format_curveset_csv(const CurveSet& curves);
void write_curveset_csv(const std::filesystem::path& path, const CurveSet& curves);
CurveSet read_curveset_csv(const std::filesystem::path& path);
/// Reads any number of rows (>= 2) and resamples to kLevels.
CurveSet read_raw_curves_csv(const std::filesystem::path& path);

}  // namespace spine3d
