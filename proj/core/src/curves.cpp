#include "spine3d/curves.hpp"

#include <algorithm>
#include <cmath>

#include "spine3d/io.hpp"
#include "spine3d/phantom.hpp"

namespace spine3d {

namespace {

const char* const kCurveNames[kCurves] = {"x1", "x2", "x3", "y1", "y2", "y3"};

void check_plane(const PlaneCurves& p, const char* plane, double upper) {
  if (p.lo.size() != static_cast<std::size_t>(kLevels) || p.mid.size() != p.lo.size() ||
      p.hi.size() != p.lo.size())
    throw std::invalid_argument(std::string(plane) + " curves must have " + std::to_string(kLevels) + " samples");
  for (int z = 0; z < kLevels; ++z) {
    const double lo = p.lo[z], mid = p.mid[z], hi = p.hi[z];
    if (!std::isfinite(lo) || !std::isfinite(mid) || !std::isfinite(hi))
      throw std::invalid_argument(std::string(plane) + " curve value not finite at z=" + std::to_string(z + 1));
    if (!(lo <= mid && mid <= hi))
      throw std::invalid_argument(std::string(plane) + " ordering violated at z=" + std::to_string(z + 1));
    if (lo < 1.0 || hi > upper)
      throw std::invalid_argument(std::string(plane) + " curve outside [1, 224] at z=" + std::to_string(z + 1));
  }
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

}  // namespace

CurveSet CurveSet::zeros() {
  CurveSet c;
  for (int k = 0; k < kCurves; ++k) c.curve(k).assign(kLevels, 0.0);
  return c;
}

std::vector<double>& CurveSet::curve(int k) {
  switch (k) {
    case 0: return coronal.lo;
    case 1: return coronal.mid;
    case 2: return coronal.hi;
    case 3: return sagittal.lo;
    case 4: return sagittal.mid;
    case 5: return sagittal.hi;
  }
  throw std::out_of_range("curve index must be in [0, 6)");
}

const std::vector<double>& CurveSet::curve(int k) const {
  return const_cast<CurveSet*>(this)->curve(k);
}

void CurveSet::validate() const {
  check_plane(coronal, "coronal", kCross);
  check_plane(sagittal, "sagittal", kCross);
}

bool CurveSet::valid() const noexcept {
  try {
    validate();
    return true;
  } catch (...) {
    return false;
  }
}

PlaneCurves curves_from_mask(const Mask2D& mask) {
  PlaneCurves out;
  const auto rows = static_cast<std::size_t>(mask.rows);
  out.lo.assign(rows, 0.0);
  out.mid.assign(rows, 0.0);
  out.hi.assign(rows, 0.0);
  std::vector<int> occupied;
  for (int r = 0; r < mask.rows; ++r) {
    int first = -1, last = -1, n = 0;
    double sum = 0.0;
    for (int c = 0; c < mask.cols; ++c) {
      if (!mask.at(r, c)) continue;
      if (first < 0) first = c;
      last = c;
      sum += c + 1;
      ++n;
    }
    if (n == 0) continue;
    occupied.push_back(r);
    out.lo[r] = first + 1;
    out.hi[r] = last + 1;
    out.mid[r] = sum / n;
  }
  if (occupied.empty()) throw NoSpineError();

  auto fill = [&](std::vector<double>& v) {
    if (occupied.size() == 1) {
      std::fill(v.begin(), v.end(), v[occupied.front()]);
      return;
    }
    // Interior gaps: interpolate between bracketing occupied rows.
    for (std::size_t k = 0; k + 1 < occupied.size(); ++k) {
      const int r0 = occupied[k], r1 = occupied[k + 1];
      for (int r = r0 + 1; r < r1; ++r) v[r] = lerp(v[r0], v[r1], static_cast<double>(r - r0) / (r1 - r0));
    }
    // Ends: extend the line through the two nearest occupied rows.
    const int a0 = occupied[0], a1 = occupied[1];
    for (int r = 0; r < a0; ++r) v[r] = v[a0] + (v[a1] - v[a0]) * static_cast<double>(r - a0) / (a1 - a0);
    const int b1 = occupied.back(), b0 = occupied[occupied.size() - 2];
    for (int r = b1 + 1; r < mask.rows; ++r)
      v[r] = v[b1] + (v[b1] - v[b0]) * static_cast<double>(r - b1) / (b1 - b0);
  };
  fill(out.lo);
  fill(out.mid);
  fill(out.hi);

  // Extrapolated lines may cross or leave the frame; restore the ordering invariant.
  const double upper = mask.cols;
  for (std::size_t r = 0; r < rows; ++r) {
    std::array<double, 3> t{out.lo[r], out.mid[r], out.hi[r]};
    for (double& v : t) v = std::clamp(v, 1.0, upper);
    std::sort(t.begin(), t.end());
    out.lo[r] = t[0];
    out.mid[r] = t[1];
    out.hi[r] = t[2];
  }
  return out;
}

std::vector<double> normalize_height(const std::vector<double>& raw, int levels) {
  if (raw.size() < 2) throw std::invalid_argument("normalize_height: need at least 2 raw rows");
  if (levels < 2) throw std::invalid_argument("normalize_height: need at least 2 output levels");
  if (raw.size() == static_cast<std::size_t>(levels)) return raw;
  std::vector<double> out(static_cast<std::size_t>(levels));
  const double step = static_cast<double>(raw.size() - 1) / (levels - 1);
  for (int i = 0; i < levels; ++i) {
    const double t = i * step;
    const auto j = std::min(static_cast<std::size_t>(t), raw.size() - 2);
    out[i] = lerp(raw[j], raw[j + 1], t - static_cast<double>(j));
  }
  out.back() = raw.back();
  return out;
}

PlaneCurves normalize_height(const PlaneCurves& raw, int levels) {
  return {normalize_height(raw.lo, levels), normalize_height(raw.mid, levels), normalize_height(raw.hi, levels)};
}

Mask2D mask_from_lateral_curves(const std::vector<double>& lo, const std::vector<double>& hi, int cols) {
  if (lo.size() != hi.size()) throw std::invalid_argument("mask_from_lateral_curves: bound lengths differ");
  Mask2D out(static_cast<int>(lo.size()), cols);
  for (int r = 0; r < out.rows; ++r) {
    const long c0 = std::max(1L, std::lround(lo[r]));
    const long c1 = std::min(static_cast<long>(cols), std::lround(hi[r]));
    for (long c = c0; c <= c1; ++c) out.at(r, static_cast<int>(c - 1)) = 1;
  }
  return out;
}

CurveSet curves_from_volume(const VoxelMask& mask) {
  CurveSet cs;
  cs.coronal = normalize_height(curves_from_mask(project(mask, Plane::Coronal)));
  cs.sagittal = normalize_height(curves_from_mask(project(mask, Plane::Sagittal)));
  return cs;
}

std::string format_curveset_csv(const CurveSet& curves) {
  CsvTable t;
  t.header.assign(std::begin(kCurveNames), std::end(kCurveNames));
  const std::size_t n = curves.coronal.size();
  for (std::size_t z = 0; z < n; ++z) {
    std::vector<std::string> row;
    for (int k = 0; k < kCurves; ++k) row.push_back(fixed(curves.curve(k)[z], 4));
    t.rows.push_back(std::move(row));
  }
  return format_csv(t);
}

void write_curveset_csv(const std::filesystem::path& path, const CurveSet& curves) {
  write_text(path, format_curveset_csv(curves));
}

namespace {

CurveSet parse_curves(const CsvTable& t, const std::string& source) {
  CurveSet cs;
  int cols[kCurves];
  for (int k = 0; k < kCurves; ++k) cols[k] = t.column(kCurveNames[k]);
  for (int k = 0; k < kCurves; ++k) {
    auto& v = cs.curve(k);
    for (const auto& row : t.rows) v.push_back(parse_double(row[cols[k]], source + " " + kCurveNames[k]));
  }
  return cs;
}

}  // namespace

CurveSet read_curveset_csv(const std::filesystem::path& path) {
  CurveSet cs = parse_curves(read_csv(path), path.string());
  if (cs.coronal.size() != static_cast<std::size_t>(kLevels))
    throw IoError(path.string() + ": expected " + std::to_string(kLevels) + " rows");
  return cs;
}

CurveSet read_raw_curves_csv(const std::filesystem::path& path) {
  CurveSet raw = parse_curves(read_csv(path), path.string());
  if (raw.coronal.size() < 2) throw IoError(path.string() + ": need at least 2 rows");
  return {normalize_height(raw.coronal), normalize_height(raw.sagittal)};
}

}  // namespace spine3d
