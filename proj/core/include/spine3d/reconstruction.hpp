#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spine3d/curves.hpp"
#include "spine3d/grid.hpp"
#include "spine3d/metrics.hpp"

namespace spine3d {

/// Axis-aligned cross-section built from four quarter-ellipses that share a
/// centre. Each quadrant uses its own semi-axes, so the boundary passes through
/// both lateral coronal points and both sagittal points even when the centre is
/// not their midpoint.
struct AxialEllipse {
  double cx = 0.0;
  double cy = 0.0;
  double a_right = 0.0;  // cx - x1
  double a_left = 0.0;   // x3 - cx
  double b_ant = 0.0;    // cy - y1
  double b_post = 0.0;   // y3 - cy

  /// Boundary point at polar angle phi (radians, 0 = +x, pi/2 = +y).
  std::pair<double, double> boundary(double phi) const;
  /// Implicit value: <= 1 inside. Semi-axes are widened by `pad` first; a zero
  /// effective semi-axis admits only points exactly on the centre line.
  double level(double x, double y, double pad = 0.0) const;
};

/// Ellipse of level z (1-based).
AxialEllipse fit_axial_ellipse(int z, const CurveSet& curves);

struct ReconstructConfig {
  // Half a voxel on every semi-axis: bounds are centres of the outermost set
  // pixels, whose extent reaches half a voxel further.
  double pad_voxels = 0.5;
  double voxel_size_mm = kDefaultVoxelSizeMm;
};

/// Stack of axial cross-sections, voxel membership tested at voxel centres.
VoxelMask reconstruct_volume(const CurveSet& curves, const ReconstructConfig& cfg = {});

/// Centreline points (x2(z), y2(z), z) for z = 1..kLevels.
std::vector<Point3> centerline3d(const CurveSet& curves);

/// SVG with coronal and sagittal silhouettes of a volume plus optional overlays of
/// predicted (red) and reference (black) centre/bound curves.
std::string render_views_svg(const VoxelMask& volume, const CurveSet* predicted, const CurveSet* reference,
                             const std::string& title);
/// Cross-section outlines sampled every `step` levels.
std::string render_cross_sections_svg(const CurveSet& curves, int step = 20);

}  // namespace spine3d
