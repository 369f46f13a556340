#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace spine3d {

// Normalized spine frame. Curve levels z = 1..209 map to voxel/row index 0..208.
// Pixel and voxel coordinates are 1-based: index i has coordinate i + 1.
inline constexpr int kLevels = 209;
inline constexpr int kCross = 224;
inline constexpr int kCurves = 6;
inline constexpr double kDefaultVoxelSizeMm = 2.197;

/// Dense row-major real image.
struct Image2D {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Image2D() = default;
  Image2D(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Image2D: negative dimensions");
  }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  bool inside(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }
  std::size_t size() const { return data.size(); }

  bool operator==(const Image2D&) const = default;
};

/// Binary 2D mask, one byte per pixel (0 or 1).
struct Mask2D {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> data;

  Mask2D() = default;
  Mask2D(int r, int c)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0) {
    if (r < 0 || c < 0) throw std::invalid_argument("Mask2D: negative dimensions");
  }

  std::uint8_t& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::uint8_t at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  bool inside(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }
  std::size_t count() const;

  bool operator==(const Mask2D&) const = default;
};

/// Binary 3D occupancy grid indexed (z, x, y); y is the fastest axis.
struct VoxelMask {
  int nz = 0;
  int nx = 0;
  int ny = 0;
  double voxel_size_mm = kDefaultVoxelSizeMm;
  std::vector<std::uint8_t> data;

  VoxelMask() = default;
  VoxelMask(int z, int x, int y, double voxel_mm = kDefaultVoxelSizeMm)
      : nz(z), nx(x), ny(y), voxel_size_mm(voxel_mm),
        data(static_cast<std::size_t>(z) * x * y, 0) {
    if (z < 0 || x < 0 || y < 0) throw std::invalid_argument("VoxelMask: negative dimensions");
  }

  std::size_t index(int z, int x, int y) const {
    return (static_cast<std::size_t>(z) * nx + x) * ny + y;
  }
  std::uint8_t& at(int z, int x, int y) { return data[index(z, x, y)]; }
  std::uint8_t at(int z, int x, int y) const { return data[index(z, x, y)]; }
  std::size_t count() const;

  bool operator==(const VoxelMask&) const = default;
};

Image2D to_image(const Mask2D& mask);
Mask2D threshold(const Image2D& image, double level);

/// Copies `src` into a zero canvas of size rows x cols with its origin at (row0, col0).
Mask2D embed(const Mask2D& src, int rows, int cols, int row0, int col0);
Image2D embed(const Image2D& src, int rows, int cols, int row0, int col0);
/// Extracts the rows x cols window starting at (row0, col0); outside pixels read as 0.
Mask2D crop(const Mask2D& src, int row0, int col0, int rows, int cols);

}  // namespace spine3d
