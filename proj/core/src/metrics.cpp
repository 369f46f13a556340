#include "spine3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "spine3d/io.hpp"

namespace spine3d {

namespace {

void check_pair(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": lengths differ");
  if (a == 0) throw std::invalid_argument(std::string(what) + ": empty input");
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> gt) {
  check_pair(pred.size(), gt.size(), "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(gt[i] - pred[i]);
  return s / static_cast<double>(pred.size());
}

double relative_error(std::span<const double> pred, std::span<const double> gt) {
  check_pair(pred.size(), gt.size(), "relative_error");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 1e-6) throw std::domain_error("denominator underflow");
    s += std::abs(gt[i] - pred[i]) / pred[i];
  }
  return s / static_cast<double>(pred.size());
}

double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("iou: mask sizes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += static_cast<std::size_t>(x && y);
    uni += static_cast<std::size_t>(x || y);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double iou(const Mask2D& a, const Mask2D& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw std::invalid_argument("iou: mask dims differ");
  return iou(std::span<const std::uint8_t>(a.data), std::span<const std::uint8_t>(b.data));
}

double iou(const VoxelMask& a, const VoxelMask& b) {
  if (a.nz != b.nz || a.nx != b.nx || a.ny != b.ny) throw std::invalid_argument("iou: volume dims differ");
  return iou(std::span<const std::uint8_t>(a.data), std::span<const std::uint8_t>(b.data));
}

double map_threshold(int k) { return static_cast<double>(k + 1) / 10.0; }

std::array<double, kMapThresholds> map_at_thresholds(std::span<const double> ious) {
  if (ious.empty()) throw std::invalid_argument("map_at_thresholds: empty list");
  for (double v : ious)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("map_at_thresholds: IoU outside [0, 1]");
  std::array<double, kMapThresholds> out{};
  for (int k = 0; k < kMapThresholds; ++k) {
    const double tau = map_threshold(k);
    const auto hits = std::count_if(ious.begin(), ious.end(), [tau](double v) { return v >= tau; });
    out[k] = static_cast<double>(hits) / static_cast<double>(ious.size());
  }
  return out;
}

Deviation curve_deviation_3d(std::span<const Point3> pred, std::span<const Point3> gt, double voxel_size_mm) {
  check_pair(pred.size(), gt.size(), "curve_deviation_3d");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    s += std::sqrt((pred[i].x - gt[i].x) * (pred[i].x - gt[i].x) + (pred[i].y - gt[i].y) * (pred[i].y - gt[i].y) +
                   (pred[i].z - gt[i].z) * (pred[i].z - gt[i].z));
  const double voxels = s / static_cast<double>(pred.size());
  return {voxels, voxels * voxel_size_mm};
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: empty input");
  Summary s;
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / n);
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
  return s;
}

std::vector<std::string> metric_csv_header() {
  std::vector<std::string> h{"target",  "samples", "mae_mean", "mae_median", "mae_sd", "re_mean",
                             "re_median", "re_sd",  "iou2d",    "iou3d"};
  for (int k = 0; k < kMapThresholds; ++k) h.push_back("map_" + fixed(map_threshold(k), 1));
  h.push_back("deviation_voxels");
  h.push_back("deviation_mm");
  return h;
}

std::vector<std::string> metric_csv_row(const MetricReport& r) {
  std::vector<std::string> row{r.target,
                               std::to_string(r.samples),
                               fixed(r.mae_px.mean, 6),
                               fixed(r.mae_px.median, 6),
                               fixed(r.mae_px.sd, 6),
                               fixed(r.re.mean, 6),
                               fixed(r.re.median, 6),
                               fixed(r.re.sd, 6),
                               fixed(r.iou2d, 6),
                               fixed(r.iou3d, 6)};
  for (double p : r.map_at) row.push_back(fixed(p, 6));
  row.push_back(fixed(r.deviation_voxels, 6));
  row.push_back(fixed(r.deviation_mm, 6));
  return row;
}

std::string format_metric_text(const MetricReport& r) {
  std::ostringstream out;
  out << "target: " << r.target << " (" << r.samples << " samples)\n"
      << "  absolute error px  mean " << fixed(r.mae_px.mean, 3) << "  median " << fixed(r.mae_px.median, 3)
      << "  sd +/- " << fixed(r.mae_px.sd, 3) << "\n"
      << "  relative error     mean " << fixed(r.re.mean, 4) << "  median " << fixed(r.re.median, 4) << "  sd +/- "
      << fixed(r.re.sd, 4) << "\n"
      << "  mask IoU 2D " << fixed(100.0 * r.iou2d, 1) << "  3D " << fixed(100.0 * r.iou3d, 1) << "\n"
      << "  3D centreline deviation " << fixed(r.deviation_voxels, 3) << " voxels = " << fixed(r.deviation_mm, 3)
      << " mm\n"
      << "  mAP@IoU";
  for (int k = 0; k < kMapThresholds; ++k) out << "  " << fixed(map_threshold(k), 1) << ":" << fixed(r.map_at[k], 3);
  out << "\n";
  return out.str();
}

}  // namespace spine3d
