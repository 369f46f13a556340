#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "spine3d/grid.hpp"

namespace spine3d {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Mean absolute error. Throws std::invalid_argument on empty or mismatched input.
double mae(std::span<const double> pred, std::span<const double> gt);

/// Mean of |gt - pred| / pred. The denominator is the prediction; any
/// prediction below 1e-6 raises std::domain_error("denominator underflow").
/// Not clamped: values above 1 are possible when errors exceed predictions.
double relative_error(std::span<const double> pred, std::span<const double> gt);

/// |A and B| / |A or B|; two empty masks give 1.0.
double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
double iou(const Mask2D& a, const Mask2D& b);
double iou(const VoxelMask& a, const VoxelMask& b);

inline constexpr int kMapThresholds = 9;

/// Threshold k (0-based) is (k + 1) / 10.
double map_threshold(int k);

/// Fraction of samples with IoU >= tau for tau = 0.1 .. 0.9.
std::array<double, kMapThresholds> map_at_thresholds(std::span<const double> ious);

struct Deviation {
  double voxels = 0.0;
  double mm = 0.0;
};

/// Mean Euclidean distance between index-matched points.
Deviation curve_deviation_3d(std::span<const Point3> pred, std::span<const Point3> gt,
                             double voxel_size_mm = kDefaultVoxelSizeMm);

/// Mean, median and population standard deviation.
struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
};

Summary summarize(std::span<const double> values);

/// Per-target report in the layout of the curve-regression results table.
struct MetricReport {
  std::string target;
  int samples = 0;
  Summary mae_px;
  Summary re;
  double iou2d = 0.0;
  double iou3d = 0.0;
  std::array<double, kMapThresholds> map_at{};
  double deviation_voxels = 0.0;
  double deviation_mm = 0.0;
};

std::vector<std::string> metric_csv_header();
std::vector<std::string> metric_csv_row(const MetricReport& r);
std::string format_metric_text(const MetricReport& r);

}  // namespace spine3d
