#include "spine3d/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "spine3d/io.hpp"
#include "spine3d/phantom.hpp"

namespace spine3d {

std::pair<double, double> AxialEllipse::boundary(double phi) const {
  const double c = std::cos(phi), s = std::sin(phi);
  const double a = c >= 0.0 ? a_left : a_right;
  const double b = s >= 0.0 ? b_post : b_ant;
  return {cx + a * c, cy + b * s};
}

double AxialEllipse::level(double x, double y, double pad) const {
  const double dx = x - cx, dy = y - cy;
  const double a = (dx >= 0.0 ? a_left : a_right) + pad;
  const double b = (dy >= 0.0 ? b_post : b_ant) + pad;
  double v = 0.0;
  if (a > 0.0) v += (dx / a) * (dx / a);
  else if (dx != 0.0) return std::numeric_limits<double>::infinity();
  if (b > 0.0) v += (dy / b) * (dy / b);
  else if (dy != 0.0) return std::numeric_limits<double>::infinity();
  return v;
}

AxialEllipse fit_axial_ellipse(int z, const CurveSet& curves) {
  if (z < 1 || static_cast<std::size_t>(z) > curves.coronal.size())
    throw std::out_of_range("fit_axial_ellipse: level out of range");
  const auto i = static_cast<std::size_t>(z - 1);
  AxialEllipse e;
  e.cx = curves.coronal.mid[i];
  e.cy = curves.sagittal.mid[i];
  e.a_right = std::max(0.0, e.cx - curves.coronal.lo[i]);
  e.a_left = std::max(0.0, curves.coronal.hi[i] - e.cx);
  e.b_ant = std::max(0.0, e.cy - curves.sagittal.lo[i]);
  e.b_post = std::max(0.0, curves.sagittal.hi[i] - e.cy);
  return e;
}

VoxelMask reconstruct_volume(const CurveSet& curves, const ReconstructConfig& cfg) {
  curves.validate();
  VoxelMask out(kLevels, kCross, kCross, cfg.voxel_size_mm);
  for (int z = 0; z < kLevels; ++z) {
    const AxialEllipse e = fit_axial_ellipse(z + 1, curves);
    const double p = cfg.pad_voxels;
    const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - e.a_right - p)) - 1);
    const int x1 = std::min(kCross - 1, static_cast<int>(std::ceil(e.cx + e.a_left + p)));
    const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - e.b_ant - p)) - 1);
    const int y1 = std::min(kCross - 1, static_cast<int>(std::ceil(e.cy + e.b_post + p)));
    for (int x = x0; x <= x1; ++x)
      for (int y = y0; y <= y1; ++y)
        if (e.level(x + 1.0, y + 1.0, p) <= 1.0) out.at(z, x, y) = 1;
  }
  return out;
}

std::vector<Point3> centerline3d(const CurveSet& curves) {
  std::vector<Point3> out;
  out.reserve(curves.coronal.size());
  for (std::size_t i = 0; i < curves.coronal.size(); ++i)
    out.push_back({curves.coronal.mid[i], curves.sagittal.mid[i], static_cast<double>(i + 1)});
  return out;
}

namespace {

void silhouette(std::ostringstream& svg, const Mask2D& m, double ox, const char* fill) {
  for (int r = 0; r < m.rows; ++r) {
    int c = 0;
    while (c < m.cols) {
      if (!m.at(r, c)) {
        ++c;
        continue;
      }
      const int start = c;
      while (c < m.cols && m.at(r, c)) ++c;
      svg << "<rect x=\"" << ox + start << "\" y=\"" << r << "\" width=\"" << c - start
          << "\" height=\"1\" fill=\"" << fill << "\"/>\n";
    }
  }
}

void polyline(std::ostringstream& svg, const std::vector<double>& v, double ox, const char* stroke) {
  svg << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"0.8\" points=\"";
  for (std::size_t i = 0; i < v.size(); ++i) svg << fixed(ox + v[i] - 0.5, 2) << ',' << fixed(i + 0.5, 2) << ' ';
  svg << "\"/>\n";
}

void overlay(std::ostringstream& svg, const CurveSet& c, const char* stroke) {
  for (const auto* v : {&c.coronal.lo, &c.coronal.mid, &c.coronal.hi}) polyline(svg, *v, 0.0, stroke);
  for (const auto* v : {&c.sagittal.lo, &c.sagittal.mid, &c.sagittal.hi}) polyline(svg, *v, kCross + 16.0, stroke);
}

}  // namespace

std::string render_views_svg(const VoxelMask& volume, const CurveSet* predicted, const CurveSet* reference,
                             const std::string& title) {
  std::ostringstream svg;
  const int width = 2 * kCross + 16;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * width << "\" height=\"" << 2 * (volume.nz + 20)
      << "\" viewBox=\"0 -20 " << width << ' ' << volume.nz + 20 << "\">\n"
      << "<text x=\"2\" y=\"-6\" font-size=\"10\">" << title << " (coronal | sagittal)</text>\n";
  silhouette(svg, project(volume, Plane::Coronal), 0.0, "#c8d4e6");
  silhouette(svg, project(volume, Plane::Sagittal), kCross + 16.0, "#c8d4e6");
  if (reference) overlay(svg, *reference, "black");
  if (predicted) overlay(svg, *predicted, "red");
  svg << "</svg>\n";
  return svg.str();
}

std::string render_cross_sections_svg(const CurveSet& curves, int step) {
  std::ostringstream svg;
  const int cell = 80;
  std::vector<int> levels;
  for (int z = 1; z <= kLevels; z += std::max(1, step)) levels.push_back(z);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cell * levels.size() << "\" height=\"" << cell
      << "\">\n";
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const AxialEllipse e = fit_axial_ellipse(levels[i], curves);
    const double ox = cell * (i + 0.5), oy = cell * 0.5;
    svg << "<polygon fill=\"none\" stroke=\"black\" stroke-width=\"0.5\" points=\"";
    for (int k = 0; k < 72; ++k) {
      const auto [x, y] = e.boundary(2.0 * 3.141592653589793 * k / 72);
      svg << fixed(ox + x - e.cx, 2) << ',' << fixed(oy + y - e.cy, 2) << ' ';
    }
    svg << "\"/>\n<text x=\"" << ox - 12 << "\" y=\"" << cell - 4 << "\" font-size=\"8\">z=" << levels[i]
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace spine3d
