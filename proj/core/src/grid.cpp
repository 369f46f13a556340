#include "spine3d/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spine3d/random.hpp"

namespace spine3d {

std::size_t Mask2D::count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

std::size_t VoxelMask::count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

Image2D to_image(const Mask2D& mask) {
  Image2D out(mask.rows, mask.cols);
  for (std::size_t i = 0; i < mask.data.size(); ++i) out.data[i] = mask.data[i] ? 1.0 : 0.0;
  return out;
}

Mask2D threshold(const Image2D& image, double level) {
  Mask2D out(image.rows, image.cols);
  for (std::size_t i = 0; i < image.data.size(); ++i) out.data[i] = image.data[i] >= level ? 1 : 0;
  return out;
}

Mask2D embed(const Mask2D& src, int rows, int cols, int row0, int col0) {
  Mask2D out(rows, cols);
  for (int r = 0; r < src.rows; ++r)
    for (int c = 0; c < src.cols; ++c)
      if (out.inside(r + row0, c + col0)) out.at(r + row0, c + col0) = src.at(r, c);
  return out;
}

Image2D embed(const Image2D& src, int rows, int cols, int row0, int col0) {
  Image2D out(rows, cols);
  for (int r = 0; r < src.rows; ++r)
    for (int c = 0; c < src.cols; ++c)
      if (out.inside(r + row0, c + col0)) out.at(r + row0, c + col0) = src.at(r, c);
  return out;
}

Mask2D crop(const Mask2D& src, int row0, int col0, int rows, int cols) {
  Mask2D out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (src.inside(r + row0, c + col0)) out.at(r, c) = src.at(r + row0, c + col0);
  return out;
}

double normal(Rng& rng) {
  constexpr double kTwoPi = 6.283185307179586476925;
  double u1 = uniform(rng, 0.0, 1.0);
  while (u1 <= 0.0) u1 = uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

}  // namespace spine3d
