#include "spine3d/registration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <numbers>
#include <tuple>

#include "spine3d/curves.hpp"
#include "spine3d/metrics.hpp"

namespace spine3d {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Rotation {
  double c;
  double s;
  explicit Rotation(double theta_deg) : c(std::cos(theta_deg * kDegToRad)), s(std::sin(theta_deg * kDegToRad)) {}
  Point2 operator()(double x, double z) const { return {c * x - s * z, s * x + c * z}; }
};

double bilinear(const Image2D& img, double r, double c) {
  const double fr = std::floor(r), fc = std::floor(c);
  const int r0 = static_cast<int>(fr), c0 = static_cast<int>(fc);
  const double wr = r - fr, wc = c - fc;
  auto px = [&](int rr, int cc) { return img.inside(rr, cc) ? img.at(rr, cc) : 0.0; };
  return (1.0 - wr) * ((1.0 - wc) * px(r0, c0) + wc * px(r0, c0 + 1)) +
         wr * ((1.0 - wc) * px(r0 + 1, c0) + wc * px(r0 + 1, c0 + 1));
}

Image2D block_average(const Image2D& img, int factor) {
  Image2D out(img.rows / factor, img.cols / factor);
  const double inv = 1.0 / (factor * factor);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) {
      double s = 0.0;
      for (int i = 0; i < factor; ++i)
        for (int j = 0; j < factor; ++j) s += img.at(r * factor + i, c * factor + j);
      out.at(r, c) = s * inv;
    }
  return out;
}

bool is_constant(const Image2D& img) {
  if (img.data.empty()) return true;
  const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
  return *hi - *lo <= 1e-12 * std::max(1.0, std::abs(*hi));
}

// Pearson correlation between `fixed` and `moving` translated by (dx, dz) pixels
// with zero fill; sums run over the whole frame.
double shifted_ncc(const Image2D& fixed, double f_sum, double f_sq, const Image2D& moving, int dx, int dz) {
  const double n = static_cast<double>(fixed.size());
  double m_sum = 0.0, m_sq = 0.0, fm = 0.0;
  const int r_begin = std::max(0, dz), r_end = std::min(fixed.rows, moving.rows + dz);
  const int c_begin = std::max(0, dx), c_end = std::min(fixed.cols, moving.cols + dx);
  for (int r = r_begin; r < r_end; ++r) {
    const double* fr = &fixed.data[static_cast<std::size_t>(r) * fixed.cols];
    const double* mr = &moving.data[static_cast<std::size_t>(r - dz) * moving.cols];
    for (int c = c_begin; c < c_end; ++c) {
      const double m = mr[c - dx];
      m_sum += m;
      m_sq += m * m;
      fm += fr[c] * m;
    }
  }
  const double cov = fm - f_sum * m_sum / n;
  const double var_f = f_sq - f_sum * f_sum / n;
  const double var_m = m_sq - m_sum * m_sum / n;
  if (var_m <= 1e-12 || var_f <= 1e-12) return -1.0;
  return cov / std::sqrt(var_f * var_m);
}

struct ShiftSearch {
  int dx = 0;
  int dz = 0;
  double score = -2.0;
};

ShiftSearch search_shifts(const Image2D& fixed, const Image2D& moving, int cx, int cz, int radius) {
  double f_sum = 0.0, f_sq = 0.0;
  for (double v : fixed.data) {
    f_sum += v;
    f_sq += v * v;
  }
  ShiftSearch best;
  for (int dz = cz - radius; dz <= cz + radius; ++dz)
    for (int dx = cx - radius; dx <= cx + radius; ++dx) {
      const double s = shifted_ncc(fixed, f_sum, f_sq, moving, dx, dz);
      if (s > best.score) best = {dx, dz, s};
    }
  return best;
}

std::pair<int, int> occupied_rows(const Mask2D& mask) {
  int first = -1, last = -1;
  for (int r = 0; r < mask.rows; ++r)
    for (int c = 0; c < mask.cols; ++c)
      if (mask.at(r, c)) {
        if (first < 0) first = r;
        last = r;
        break;
      }
  if (first < 0) throw NoSpineError();
  return {first, last};
}

// x of a polyline (monotone in z) at height z; false outside its z-range.
bool sample_polyline(const std::vector<Point2>& poly, double z, double& x) {
  if (poly.size() < 2) return false;
  const bool increasing = poly.back().z >= poly.front().z;
  auto lo = [&](std::size_t i) { return increasing ? poly[i] : poly[poly.size() - 1 - i]; };
  const double zmin = lo(0).z, zmax = lo(poly.size() - 1).z;
  if (z < zmin || z > zmax) return false;
  std::size_t a = 0, b = poly.size() - 1;
  while (b - a > 1) {
    const std::size_t m = (a + b) / 2;
    (lo(m).z <= z ? a : b) = m;
  }
  const Point2 p = lo(a), q = lo(b);
  const double dz = q.z - p.z;
  x = dz > 0.0 ? p.x + (q.x - p.x) * (z - p.z) / dz : p.x;
  return true;
}

Image2D gaussian_blur(const Image2D& in, double sigma) {
  if (sigma <= 0.0) return in;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& v : k) v /= sum;
  Image2D tmp(in.rows, in.cols), out(in.rows, in.cols);
  for (int r = 0; r < in.rows; ++r)
    for (int c = 0; c < in.cols; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        if (in.inside(r, c + i)) acc += k[i + radius] * in.at(r, c + i);
      tmp.at(r, c) = acc;
    }
  for (int r = 0; r < in.rows; ++r)
    for (int c = 0; c < in.cols; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        if (tmp.inside(r + i, c)) acc += k[i + radius] * tmp.at(r + i, c);
      out.at(r, c) = acc;
    }
  return out;
}

// Position of the 0.5 crossing between samples a (at 0) and b (at 1).
double crossing(double a, double b) { return a == b ? 0.5 : (0.5 - a) / (b - a); }

// Sub-pixel contours of a blurred mask: the 0.5 level set per row, as right
// bound, centre and left bound polylines, plus the centreline end points.
struct SoftContours {
  std::array<std::vector<Point2>, 3> lines;
  Point2 top, bottom;
  bool top_valid = false, bottom_valid = false;  // false when the end touches the frame
};

SoftContours soft_contours(const Mask2D& mask, double sigma) {
  const Image2D soft = gaussian_blur(to_image(mask), sigma);
  SoftContours out;
  for (int r = 0; r < soft.rows; ++r) {
    int first = -1, last = -1;
    for (int c = 0; c < soft.cols; ++c)
      if (soft.at(r, c) >= 0.5) {
        if (first < 0) first = c;
        last = c;
      }
    if (first < 0) continue;
    const double lo = first > 0 ? first - 1 + crossing(soft.at(r, first - 1), soft.at(r, first)) : first;
    const double hi = last + 1 < soft.cols ? last + crossing(soft.at(r, last), soft.at(r, last + 1)) : last;
    const double z = r + 1.0;
    out.lines[0].push_back({lo + 1.0, z});
    out.lines[1].push_back({0.5 * (lo + hi) + 1.0, z});
    out.lines[2].push_back({hi + 1.0, z});
  }
  if (out.lines[1].empty()) throw NoSpineError();
  // Ends: mean vertical 0.5 crossing over the central half of the width, taken
  // a few rows inside so a tilted end cut is measured along its whole span.
  auto end_point = [&](bool top) {
    const auto& mid = out.lines[1];
    const std::size_t inset = std::min<std::size_t>(4, mid.size() - 1);
    const std::size_t k = top ? inset : mid.size() - 1 - inset;
    const int r_in = static_cast<int>(mid[k].z) - 1;
    const double half = 0.25 * (out.lines[2][k].x - out.lines[0][k].x);
    const int c0 = static_cast<int>(std::ceil(mid[k].x - 1.0 - half));
    const int c1 = static_cast<int>(std::floor(mid[k].x - 1.0 + half));
    const int dir = top ? -1 : 1;
    double sx = 0.0, sz = 0.0;
    int n = 0;
    for (int c = std::max(c0, 0); c <= std::min(c1, soft.cols - 1); ++c) {
      int r = r_in;
      while (soft.inside(r + dir, c) && soft.at(r + dir, c) >= 0.5) r += dir;
      if (!soft.inside(r + dir, c) || soft.at(r, c) < 0.5) continue;
      sx += c + 1.0;
      sz += r + dir * crossing(soft.at(r, c), soft.at(r + dir, c)) + 1.0;
      ++n;
    }
    return std::pair{n > 0 ? Point2{sx / n, sz / n} : mid[top ? 0 : mid.size() - 1], n > 0};
  };
  const int margin = 2;
  std::tie(out.top, out.top_valid) = end_point(true);
  std::tie(out.bottom, out.bottom_valid) = end_point(false);
  out.top_valid = out.top_valid && out.lines[1].front().z - 1.0 >= margin;
  out.bottom_valid = out.bottom_valid && out.lines[1].back().z - 1.0 <= soft.rows - 1 - margin;
  return out;
}

}  // namespace

RigidTransform2D RigidTransform2D::inverse() const {
  // p = R^T (p' - pivot - t) + pivot  =>  theta' = -theta, t' = -R^T t
  const Rotation rt(-theta);
  const Point2 t = rt(tx, ty);
  return {-theta, -t.x, -t.z};
}

RigidTransform2D compose(const RigidTransform2D& second, const RigidTransform2D& first) {
  const Rotation r2(second.theta);
  const Point2 t = r2(first.tx, first.ty);
  return {first.theta + second.theta, t.x + second.tx, t.z + second.ty};
}

Point2 apply_transform(const RigidTransform2D& t, Point2 p) {
  const Rotation r(t.theta);
  const Point2 q = r(p.x - kPivotX, p.z - kPivotZ);
  return {q.x + kPivotX + t.tx, q.z + kPivotZ + t.ty};
}

std::vector<Point2> apply_transform(const RigidTransform2D& t, std::span<const Point2> pts) {
  std::vector<Point2> out;
  out.reserve(pts.size());
  for (const Point2& p : pts) out.push_back(apply_transform(t, p));
  return out;
}

Image2D apply_transform(const RigidTransform2D& t, const Image2D& image) {
  const RigidTransform2D inv = t.inverse();
  Image2D out(image.rows, image.cols);
  if (inv.theta == 0.0 && inv.tx == std::round(inv.tx) && inv.ty == std::round(inv.ty)) {
    // Integer translation: exact pixel shift.
    const int dx = static_cast<int>(inv.tx), dz = static_cast<int>(inv.ty);
    for (int r = 0; r < out.rows; ++r)
      for (int c = 0; c < out.cols; ++c)
        if (image.inside(r + dz, c + dx)) out.at(r, c) = image.at(r + dz, c + dx);
    return out;
  }
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) {
      const Point2 src = apply_transform(inv, Point2{c + 1.0, r + 1.0});
      out.at(r, c) = bilinear(image, src.z - 1.0, src.x - 1.0);
    }
  return out;
}

Mask2D apply_transform(const RigidTransform2D& t, const Mask2D& mask) {
  return threshold(apply_transform(t, to_image(mask)), 0.5);
}

std::vector<double> stage1_angles(const Stage1Config& cfg) {
  std::vector<double> out;
  if (cfg.angle_samples == 1) return {0.0};
  for (int k = 0; k < cfg.angle_samples; ++k)
    out.push_back(cfg.angle_range_deg * (2.0 * k / (cfg.angle_samples - 1) - 1.0));
  return out;
}

double normalized_cross_correlation(const Image2D& a, const Image2D& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw std::invalid_argument("ncc: image sizes differ");
  if (is_constant(a) || is_constant(b)) throw DegenerateCorrelation();
  double s = 0.0, sq = 0.0;
  for (double v : a.data) {
    s += v;
    sq += v * v;
  }
  return shifted_ncc(a, s, sq, b, 0, 0);
}

Stage1Result stage1_image_align(const Image2D& fixed, const Image2D& moving, const Stage1Config& cfg) {
  if (fixed.rows != moving.rows || fixed.cols != moving.cols)
    throw std::invalid_argument("stage1_image_align: image sizes differ");
  if (is_constant(fixed) || is_constant(moving)) throw DegenerateCorrelation();
  if (cfg.angle_samples < 1 || cfg.downsample < 1) throw std::invalid_argument("stage1_image_align: bad config");

  const int f = cfg.downsample;
  const Image2D fixed_ds = block_average(fixed, f);
  const int coarse_radius = std::max(1, cfg.max_shift_px / f);
  const std::vector<double> angles = stage1_angles(cfg);

  Stage1Result best;
  best.score = -2.0;
  for (std::size_t k = 0; k < angles.size(); ++k) {
    const Image2D rotated = apply_transform(RigidTransform2D{angles[k], 0.0, 0.0}, moving);
    const ShiftSearch coarse = search_shifts(fixed_ds, block_average(rotated, f), 0, 0, coarse_radius);
    const ShiftSearch fine = search_shifts(fixed, rotated, coarse.dx * f, coarse.dz * f, cfg.refine_radius_px);
    if (fine.score > best.score) {
      best.score = fine.score;
      best.angle_index = static_cast<int>(k);
      best.transform = {angles[k], static_cast<double>(fine.dx), static_cast<double>(fine.dz)};
    }
  }
  if (best.score <= -1.0) throw DegenerateCorrelation();
  return best;
}

double mean_squared_error(std::span<const Point2> a, std::span<const Point2> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("mean_squared_error: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dx = a[i].x - b[i].x, dz = a[i].z - b[i].z;
    s += dx * dx + dz * dz;
  }
  return s / static_cast<double>(a.size());
}

Stage2Result stage2_curve_align(std::span<const Point2> fixed_pts, std::span<const Point2> moving_pts) {
  if (fixed_pts.size() != moving_pts.size()) throw std::invalid_argument("stage2: point counts differ");
  if (fixed_pts.size() < 2) throw std::invalid_argument("stage2: need at least 2 point pairs");
  const double n = static_cast<double>(fixed_pts.size());
  Point2 mf, mm;
  for (std::size_t i = 0; i < fixed_pts.size(); ++i) {
    mf.x += fixed_pts[i].x / n;
    mf.z += fixed_pts[i].z / n;
    mm.x += moving_pts[i].x / n;
    mm.z += moving_pts[i].z / n;
  }
  // Cross-covariance terms; in 2D the optimal proper rotation is atan2 of the
  // antisymmetric over the symmetric part, which never yields a reflection.
  double dot = 0.0, cross = 0.0, spread = 0.0;
  for (std::size_t i = 0; i < fixed_pts.size(); ++i) {
    const double fx = fixed_pts[i].x - mf.x, fz = fixed_pts[i].z - mf.z;
    const double mx = moving_pts[i].x - mm.x, mz = moving_pts[i].z - mm.z;
    dot += fx * mx + fz * mz;
    cross += fz * mx - fx * mz;
    spread += mx * mx + mz * mz;
  }
  Stage2Result out;
  double theta = 0.0;
  if (spread <= 1e-18) {
    out.degenerate = true;
  } else {
    theta = std::atan2(cross, dot) / kDegToRad;
  }
  const Rotation r(theta);
  const Point2 rc = r(mm.x - kPivotX, mm.z - kPivotZ);
  out.transform = {theta, mf.x - kPivotX - rc.x, mf.z - kPivotZ - rc.z};
  const auto moved = apply_transform(out.transform, moving_pts);
  out.mse = mean_squared_error(fixed_pts, moved);
  return out;
}

Image2D bend(const Image2D& image, double amplitude, int first_row, int last_row) {
  Image2D out(image.rows, image.cols);
  const double span = std::max(1, last_row - first_row);
  for (int r = 0; r < image.rows; ++r) {
    const double u = std::clamp((r - first_row) / span, 0.0, 1.0);
    const double shift = amplitude * std::sin(std::numbers::pi * u);
    for (int c = 0; c < image.cols; ++c) out.at(r, c) = bilinear(image, r, c - shift);
  }
  return out;
}

Mask2D bend(const Mask2D& mask, double amplitude) {
  const auto [first, last] = occupied_rows(mask);
  return threshold(bend(to_image(mask), amplitude, first, last), 0.5);
}

bool accept_alignment(double mask_iou, double threshold) { return mask_iou >= threshold; }

std::vector<Point2> contour_keypoints(const Mask2D& mask, std::span<const double> levels) {
  const PlaneCurves curves = curves_from_mask(mask);
  std::vector<Point2> out;
  out.reserve(levels.size() * 3);
  for (const auto* v : {&curves.lo, &curves.mid, &curves.hi}) {
    for (double z : levels) {
      const double r = std::clamp(z - 1.0, 0.0, static_cast<double>(mask.rows - 1));
      const auto r0 = std::min(static_cast<std::size_t>(r), v->size() - 1);
      const auto r1 = std::min(r0 + 1, v->size() - 1);
      const double w = r - static_cast<double>(r0);
      out.push_back({(*v)[r0] + ((*v)[r1] - (*v)[r0]) * w, z});
    }
  }
  return out;
}

AlignmentReport align_pair(const Image2D& fixed_img, const Image2D& moving_img, const Mask2D& fixed_mask,
                           const Mask2D& moving_mask, const AlignConfig& cfg) {
  if (fixed_img.rows != moving_img.rows || fixed_img.cols != moving_img.cols ||
      fixed_mask.rows != moving_mask.rows || fixed_mask.cols != moving_mask.cols ||
      fixed_mask.rows != fixed_img.rows || fixed_mask.cols != fixed_img.cols)
    throw std::invalid_argument("align_pair: inconsistent dimensions");
  if (cfg.keypoints < 2) throw std::invalid_argument("align_pair: need at least 2 keypoints");

  AlignmentReport report;
  const Stage1Result s1 = stage1_image_align(fixed_img, moving_img, cfg.stage1);
  report.stage1 = s1.transform;
  report.stage1_score = s1.score;

  // Stage 2 matches sub-pixel contours of the two masks. Fixed keypoints sit at
  // equally spaced interior levels; the moving contours are carried by the
  // current transform and sampled at the same levels. The centreline end points
  // pin the shift along the spine.
  const SoftContours fc = soft_contours(fixed_mask, cfg.contour_sigma);
  const SoftContours mc = soft_contours(moving_mask, cfg.contour_sigma);
  const double z_first = fc.lines[1].front().z + cfg.end_trim_rows;
  const double z_last = fc.lines[1].back().z - cfg.end_trim_rows;
  std::vector<double> levels;
  for (int k = 0; k < cfg.keypoints; ++k)
    levels.push_back(z_last > z_first ? z_first + (z_last - z_first) * k / (cfg.keypoints - 1) : z_first);

  RigidTransform2D total = s1.transform;
  for (int it = 0; it < cfg.stage2_iterations; ++it) {
    std::vector<Point2> fp, mp;
    for (int k = 0; k < 3; ++k) {
      const auto moved = apply_transform(total, mc.lines[k]);
      for (double z : levels) {
        double fx = 0.0, mx = 0.0;
        if (!sample_polyline(fc.lines[k], z, fx) || !sample_polyline(moved, z, mx)) continue;
        fp.push_back({fx, z});
        mp.push_back({mx, z});
      }
    }
    const std::vector<Point2> ends = apply_transform(total, std::vector<Point2>{mc.top, mc.bottom});
    for (int w = 0; w < cfg.end_weight; ++w) {
      if (fc.top_valid && mc.top_valid) {
        fp.push_back(fc.top);
        mp.push_back(ends[0]);
      }
      if (fc.bottom_valid && mc.bottom_valid) {
        fp.push_back(fc.bottom);
        mp.push_back(ends[1]);
      }
    }
    if (fp.size() < 2) break;
    const Stage2Result step = stage2_curve_align(fp, mp);
    total = compose(step.transform, total);
    report.stage2_mse = step.mse;
    if (std::abs(step.transform.theta) < 1e-9 && std::abs(step.transform.tx) < 1e-9 &&
        std::abs(step.transform.ty) < 1e-9)
      break;
  }
  report.composed = total;
  report.stage2 = compose(total, s1.transform.inverse());

  report.mask_iou = iou(apply_transform(total, moving_mask), fixed_mask);
  report.accepted = accept_alignment(report.mask_iou, cfg.iou_threshold);
  return report;
}

KeyValues to_key_values(const AlignmentReport& r) {
  KeyValues kv;
  auto put = [&](const std::string& prefix, const RigidTransform2D& t) {
    kv[prefix + "_theta"] = format_double(t.theta);
    kv[prefix + "_tx"] = format_double(t.tx);
    kv[prefix + "_ty"] = format_double(t.ty);
  };
  put("stage1", r.stage1);
  put("stage2", r.stage2);
  put("composed", r.composed);
  kv["stage1_score"] = format_double(r.stage1_score);
  kv["stage2_mse"] = format_double(r.stage2_mse);
  kv["mask_iou"] = format_double(r.mask_iou);
  kv["accepted"] = r.accepted ? "1" : "0";
  return kv;
}

AlignmentReport alignment_report_from(const KeyValues& kv) {
  auto get = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw IoError("alignment report missing key '" + key + "'");
    return parse_double(it->second, key);
  };
  auto transform = [&](const std::string& prefix) {
    return RigidTransform2D{get(prefix + "_theta"), get(prefix + "_tx"), get(prefix + "_ty")};
  };
  AlignmentReport r;
  r.stage1 = transform("stage1");
  r.stage2 = transform("stage2");
  r.composed = transform("composed");
  r.stage1_score = get("stage1_score");
  r.stage2_mse = get("stage2_mse");
  r.mask_iou = get("mask_iou");
  r.accepted = get("accepted") != 0.0;
  return r;
}

}  // namespace spine3d
