#pragma once

#include <filesystem>
#include <string>

#include <spine3d/phantom.hpp>
#include <spine3d/random.hpp>

namespace testutil {

// Phantom with a straight centreline and constant semi-axes.
inline spine3d::SpinePhantom straight_phantom(double cx, double cy, double a, double b) {
  spine3d::SpinePhantom ph;
  ph.cx.assign(spine3d::kLevels, cx);
  ph.cy.assign(spine3d::kLevels, cy);
  ph.a.assign(spine3d::kLevels, a);
  ph.b.assign(spine3d::kLevels, b);
  return ph;
}

inline spine3d::PhantomParams flat_params() {
  spine3d::PhantomParams p;
  p.num_coronal_modes = 2;
  p.coronal_amplitudes = {0.0, 0.0};
  p.coronal_phases = {0.0, 0.0};
  p.sagittal_amplitudes = {0.0};
  p.sagittal_phases = {0.0};
  p.radius_wobble = 0.0;
  return p;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    spine3d::Rng rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("spine3d_" + tag + "_" + std::to_string(rng() % 1000000007));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
