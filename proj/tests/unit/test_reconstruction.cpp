#include <doctest.h>

#include <cmath>
#include <numbers>

#include <spine3d/metrics.hpp>
#include <spine3d/phantom.hpp>
#include <spine3d/reconstruction.hpp>

using namespace spine3d;

namespace {

CurveSet constant_curves(double x1, double x2, double x3, double y1, double y2, double y3) {
  CurveSet cs = CurveSet::zeros();
  const double v[kCurves] = {x1, x2, x3, y1, y2, y3};
  for (int k = 0; k < kCurves; ++k) cs.curve(k).assign(kLevels, v[k]);
  return cs;
}

constexpr double kPi = std::numbers::pi;

}  // namespace

TEST_CASE("symmetric level fits a centred ellipse") {
  const AxialEllipse e = fit_axial_ellipse(1, constant_curves(98, 100, 102, 99, 100, 101));
  CHECK(e.cx == 100.0);
  CHECK(e.cy == 100.0);
  CHECK(e.a_right == 2.0);
  CHECK(e.a_left == 2.0);
  CHECK(e.b_ant == 1.0);
  CHECK(e.b_post == 1.0);
  const auto check = [&](double phi, double x, double y) {
    const auto [bx, by] = e.boundary(phi);
    CHECK(bx == doctest::Approx(x));
    CHECK(by == doctest::Approx(y));
  };
  check(0.0, 102.0, 100.0);
  check(kPi, 98.0, 100.0);
  check(0.5 * kPi, 100.0, 101.0);
  check(1.5 * kPi, 100.0, 99.0);
}

TEST_CASE("off-midpoint centre keeps both lateral points on the boundary") {
  const AxialEllipse e = fit_axial_ellipse(5, constant_curves(98, 99, 102, 99, 100, 101));
  CHECK(e.a_right == 1.0);
  CHECK(e.a_left == 3.0);
  CHECK(e.boundary(0.0).first == doctest::Approx(102.0));
  CHECK(e.boundary(kPi).first == doctest::Approx(98.0));
  CHECK(e.level(102.0, 100.0) == doctest::Approx(1.0));
  CHECK(e.level(98.0, 100.0) == doctest::Approx(1.0));
  CHECK(e.level(99.0, 100.0) == 0.0);
}

TEST_CASE("zero-width level degenerates to the sagittal segment") {
  const AxialEllipse e = fit_axial_ellipse(1, constant_curves(100, 100, 100, 95, 100, 106));
  CHECK(e.a_right == 0.0);
  CHECK(e.a_left == 0.0);
  for (double y = 95.0; y <= 106.0; y += 1.0) CHECK(e.level(100.0, y) <= 1.0);
  CHECK(e.level(100.0, 94.0) > 1.0);
  CHECK(std::isinf(e.level(100.5, 100.0)));
  ReconstructConfig rc;
  rc.pad_voxels = 0.0;
  const VoxelMask v = reconstruct_volume(constant_curves(100, 100, 100, 95, 100, 106), rc);
  CHECK(v.count() == static_cast<std::size_t>(kLevels * 12));
  for (int y = 94; y <= 105; ++y) CHECK(v.at(0, 99, y) == 1);
}

TEST_CASE("constant curves reconstruct a prism") {
  const VoxelMask v = reconstruct_volume(constant_curves(90, 100.3, 112, 95, 101, 108));
  std::size_t level0 = 0;
  for (int x = 0; x < kCross; ++x)
    for (int y = 0; y < kCross; ++y) level0 += v.at(0, x, y);
  CHECK(level0 > 0);
  CHECK(v.count() == level0 * kLevels);
}

TEST_CASE("phantom round-trip reaches 3D IoU >= 0.95") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    const VoxelMask truth = rasterize(sample_phantom(PhantomConfig{}, seed));
    const CurveSet cs = curves_from_volume(truth);
    const VoxelMask rec = reconstruct_volume(cs);
    CHECK(iou(rec, truth) >= 0.95);

    // Projections agree with the bound masks.
    const Mask2D cor = project(rec, Plane::Coronal), sag = project(rec, Plane::Sagittal);
    CHECK(iou(cor, mask_from_lateral_curves(cs.coronal.lo, cs.coronal.hi)) >= 0.97);
    CHECK(iou(sag, mask_from_lateral_curves(cs.sagittal.lo, cs.sagittal.hi)) >= 0.97);
  }
}

TEST_CASE("reconstruct rejects invalid curves") {
  CurveSet cs = constant_curves(90, 100, 110, 95, 100, 105);
  cs.coronal.lo[3] = 120.0;
  CHECK_THROWS_AS(reconstruct_volume(cs), std::invalid_argument);
  CHECK_THROWS_AS(fit_axial_ellipse(0, cs), std::out_of_range);
  CHECK_THROWS_AS(fit_axial_ellipse(kLevels + 1, cs), std::out_of_range);
}

TEST_CASE("centreline of straight curves is collinear") {
  const std::vector<Point3> c = centerline3d(constant_curves(90, 100, 110, 95, 102, 105));
  REQUIRE(c.size() == static_cast<std::size_t>(kLevels));
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(c[i].x == 100.0);
    CHECK(c[i].y == 102.0);
    CHECK(c[i].z == static_cast<double>(i + 1));
  }
}

TEST_CASE("centreline follows the phantom within 1 px") {
  const SpinePhantom ph = sample_phantom(PhantomConfig{}, 9);
  const std::vector<Point3> c = centerline3d(curves_from_volume(rasterize(ph)));
  REQUIRE(c.size() == static_cast<std::size_t>(kLevels));
  for (int z = 0; z < kLevels; ++z) {
    CHECK(std::abs(c[z].x - ph.cx[z]) <= 1.0);
    CHECK(std::abs(c[z].y - ph.cy[z]) <= 1.0);
  }
}

TEST_CASE("figures are well-formed SVG") {
  const CurveSet cs = curves_from_volume(rasterize(sample_phantom(PhantomConfig{}, 2)));
  const std::string views = render_views_svg(reconstruct_volume(cs), &cs, &cs, "s00002");
  CHECK(views.rfind("<svg", 0) == 0);
  CHECK(views.find("</svg>") != std::string::npos);
  CHECK(views.find("s00002") != std::string::npos);
  const std::string sections = render_cross_sections_svg(cs);
  CHECK(sections.find("</svg>") != std::string::npos);
}
