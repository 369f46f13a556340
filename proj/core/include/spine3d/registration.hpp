#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spine3d/grid.hpp"
#include "spine3d/io.hpp"

namespace spine3d {

/// Rigid motion of the (x, z) image plane:
///   p' = R(theta) (p - pivot) + pivot + (tx, ty)
/// with the pivot fixed at the centre of the 224 x 224 crop frame, so transforms
/// compose as a group. x is the column coordinate and z the row coordinate, both
/// 1-based. theta is in degrees; ty translates along rows.
struct RigidTransform2D {
  double theta = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  static RigidTransform2D identity() { return {}; }
  RigidTransform2D inverse() const;
  bool operator==(const RigidTransform2D&) const = default;
};

inline constexpr double kPivotX = 112.5;
inline constexpr double kPivotZ = 112.5;

/// Applies `second` after `first`.
RigidTransform2D compose(const RigidTransform2D& second, const RigidTransform2D& first);

struct Point2 {
  double x = 0.0;
  double z = 0.0;
};

Point2 apply_transform(const RigidTransform2D& t, Point2 p);
std::vector<Point2> apply_transform(const RigidTransform2D& t, std::span<const Point2> pts);
/// Resamples bilinearly at the pre-image of every output pixel; out-of-frame reads are 0.
Image2D apply_transform(const RigidTransform2D& t, const Image2D& image);
/// Bilinear resample of the 0/1 mask, thresholded at 0.5.
Mask2D apply_transform(const RigidTransform2D& t, const Mask2D& mask);

class DegenerateCorrelation : public std::invalid_argument {
 public:
  DegenerateCorrelation() : std::invalid_argument("degenerate correlation") {}
};

struct Stage1Config {
  int angle_samples = 10;
  double angle_range_deg = 2.0;  // samples span [-range, +range] inclusive
  int downsample = 4;
  int max_shift_px = 24;  // coarse search radius at full resolution
  int refine_radius_px = 4;
};

struct Stage1Result {
  RigidTransform2D transform;
  double score = 0.0;  // normalized cross-correlation at the optimum
  int angle_index = 0;
};

/// Sampled angles: range * (2k / (n - 1) - 1), k = 0..n-1.
std::vector<double> stage1_angles(const Stage1Config& cfg = {});

/// Pearson correlation of two same-size images over the full frame.
double normalized_cross_correlation(const Image2D& a, const Image2D& b);

/// Exhaustive angle search; per angle, dense NCC over translations on block-averaged
/// images, then a full-resolution refinement around the coarse peak. The returned
/// transform maps `moving` onto `fixed`.
Stage1Result stage1_image_align(const Image2D& fixed, const Image2D& moving, const Stage1Config& cfg = {});

struct Stage2Result {
  RigidTransform2D transform;
  double mse = 0.0;
  bool degenerate = false;
};

/// Closed-form least-squares rigid fit mapping moving_pts[i] onto fixed_pts[i].
Stage2Result stage2_curve_align(std::span<const Point2> fixed_pts, std::span<const Point2> moving_pts);

double mean_squared_error(std::span<const Point2> a, std::span<const Point2> b);

struct AlignConfig {
  Stage1Config stage1;
  int keypoints = 64;        // samples per contour curve
  int end_trim_rows = 4;     // rows excluded at each end of the fixed contour
  double contour_sigma = 1.0;  // Gaussian blur (px) before sub-pixel edge extraction
  int end_weight = 4;          // copies of each centreline end point in the stage-2 fit
  int stage2_iterations = 8;
  double iou_threshold = 0.70;
};

struct AlignmentReport {
  RigidTransform2D stage1;
  RigidTransform2D stage2;
  RigidTransform2D composed;
  double stage1_score = 0.0;
  double stage2_mse = 0.0;
  double mask_iou = 0.0;
  bool accepted = false;
};

/// Non-rigid lateral bend: row r is shifted along x by
/// amplitude * sin(pi * (r - first_row) / (last_row - first_row)), clamped to the
/// end rows outside that range. Bilinear resampling, zero fill.
Image2D bend(const Image2D& image, double amplitude, int first_row, int last_row);
/// Bend over the mask's occupied rows, thresholded at 0.5.
Mask2D bend(const Mask2D& mask, double amplitude);

/// Filter rule: a pair is discarded when IoU is strictly below the threshold (or NaN).
bool accept_alignment(double mask_iou, double threshold = 0.70);

/// Keypoints (x, z) along the right bound, centre and left bound of `mask`,
/// sampled at `levels` row coordinates (1-based, fractional allowed).
std::vector<Point2> contour_keypoints(const Mask2D& mask, std::span<const double> levels);

/// Two-stage alignment of a moving image/mask pair onto a fixed pair.
AlignmentReport align_pair(const Image2D& fixed_img, const Image2D& moving_img, const Mask2D& fixed_mask,
                           const Mask2D& moving_mask, const AlignConfig& cfg = {});

KeyValues to_key_values(const AlignmentReport& r);
AlignmentReport alignment_report_from(const KeyValues& kv);

}  // namespace spine3d
