#include <doctest.h>

#include <cmath>

#include <spine3d/curves.hpp>
#include <spine3d/io.hpp>
#include <spine3d/phantom.hpp>

#include "../common/helpers.hpp"

using namespace spine3d;

namespace {

Mask2D columns_mask(int c0, int c1) {  // 1-based inclusive columns on every row
  Mask2D m(kLevels, kCross);
  for (int r = 0; r < kLevels; ++r)
    for (int c = c0; c <= c1; ++c) m.at(r, c - 1) = 1;
  return m;
}

}  // namespace

TEST_CASE("single column mask gives constant curves") {
  const PlaneCurves pc = curves_from_mask(columns_mask(100, 100));
  for (int r = 0; r < kLevels; ++r) {
    CHECK(pc.lo[r] == 100.0);
    CHECK(pc.mid[r] == 100.0);
    CHECK(pc.hi[r] == 100.0);
  }
}

TEST_CASE("rectangle gives bounds and centre") {
  const PlaneCurves pc = curves_from_mask(columns_mask(90, 110));
  for (int r = 0; r < kLevels; ++r) {
    CHECK(pc.lo[r] == 90.0);
    CHECK(pc.mid[r] == 100.0);
    CHECK(pc.hi[r] == 110.0);
  }
}

TEST_CASE("empty mask throws NoSpineError") {
  CHECK_THROWS_AS(curves_from_mask(Mask2D(kLevels, kCross)), NoSpineError);
}

TEST_CASE("empty rows are interpolated and extrapolated") {
  Mask2D m(10, 50);
  m.at(2, 9) = 1;  // coordinate 10 on row 2
  m.at(6, 29) = 1; // coordinate 30 on row 6
  const PlaneCurves pc = curves_from_mask(m);
  CHECK(pc.mid[4] == doctest::Approx(20.0));
  CHECK(pc.mid[0] == doctest::Approx(1.0));  // 10 - 2*5 = 0, clamped to the frame
  CHECK(pc.mid[8] == doctest::Approx(40.0));
}

TEST_CASE("recovered centre follows the analytic centreline") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    const SpinePhantom ph = sample_phantom(PhantomConfig{}, seed);
    const CurveSet cs = curves_from_volume(rasterize(ph));
    for (int z = 0; z < kLevels; ++z) {
      REQUIRE(std::abs(cs.coronal.mid[z] - ph.cx[z]) <= 1.0);
      REQUIRE(std::abs(cs.sagittal.mid[z] - ph.cy[z]) <= 1.0);
    }
    CHECK(cs.valid());
  }
}

TEST_CASE("normalize_height is the identity on kLevels samples") {
  std::vector<double> v(kLevels);
  for (int i = 0; i < kLevels; ++i) v[i] = std::sin(0.1 * i);
  CHECK(normalize_height(v) == v);
}

TEST_CASE("constant curves stay constant at any raw length") {
  for (int n : {2, 50, 208, 210, 1000}) {
    const std::vector<double> out = normalize_height(std::vector<double>(n, 7.25));
    REQUIRE(out.size() == static_cast<std::size_t>(kLevels));
    for (double v : out) CHECK(v == doctest::Approx(7.25).epsilon(1e-15));
  }
}

TEST_CASE("linear ramp over 418 rows resamples to the closed-form ramp") {
  std::vector<double> raw(418);
  for (int i = 0; i < 418; ++i) raw[i] = 3.0 + 0.5 * i;
  const std::vector<double> out = normalize_height(raw);
  // Output i samples raw position t = i * 417 / 208.
  for (int i = 0; i < kLevels; ++i) CHECK(out[i] == doctest::Approx(3.0 + 0.5 * i * 417.0 / 208.0).epsilon(1e-12));
  CHECK(out.front() == raw.front());
  CHECK(out.back() == raw.back());
}

TEST_CASE("normalize_height rejects degenerate inputs") {
  CHECK_THROWS(normalize_height(std::vector<double>{1.0}));
  CHECK_THROWS(normalize_height(std::vector<double>{1.0, 2.0}, 1));
}

TEST_CASE("mask_from_lateral_curves") {
  SUBCASE("single pixel per row") {
    const Mask2D m = mask_from_lateral_curves(std::vector<double>(kLevels, 100.0), std::vector<double>(kLevels, 100.0));
    CHECK(m.count() == static_cast<std::size_t>(kLevels));
    for (int r = 0; r < kLevels; ++r) CHECK(m.at(r, 99) == 1);
  }
  SUBCASE("band area") {
    const Mask2D m = mask_from_lateral_curves(std::vector<double>(kLevels, 90.0), std::vector<double>(kLevels, 110.0));
    CHECK(m.count() == static_cast<std::size_t>(kLevels * 21));
  }
  SUBCASE("mismatched lengths throw") {
    CHECK_THROWS(mask_from_lateral_curves({1.0, 2.0}, {1.0}));
  }
}

TEST_CASE("curves and bound masks round-trip on phantom projections") {
  for (std::uint64_t seed : {10ull, 20ull, 30ull}) {
    const VoxelMask vol = rasterize(sample_phantom(PhantomConfig{}, seed));
    for (Plane plane : {Plane::Coronal, Plane::Sagittal}) {
      const Mask2D proj = project(vol, plane);
      const PlaneCurves pc = curves_from_mask(proj);
      const Mask2D back = mask_from_lateral_curves(pc.lo, pc.hi);
      // Ellipse projections are convex per row, so the fill is exact.
      CHECK(back == proj);
    }
  }
}

TEST_CASE("CurveSet validation and CSV round-trip") {
  const CurveSet cs = curves_from_volume(rasterize(sample_phantom(PhantomConfig{}, 77)));
  CHECK_NOTHROW(cs.validate());
  testutil::TempDir dir("curves");
  write_curveset_csv(dir.path() / "c.csv", cs);
  const CurveSet back = read_curveset_csv(dir.path() / "c.csv");
  for (int k = 0; k < kCurves; ++k)
    for (int z = 0; z < kLevels; ++z) REQUIRE(std::abs(back.curve(k)[z] - cs.curve(k)[z]) <= 5e-5);

  CurveSet bad = cs;
  std::swap(bad.coronal.lo[5], bad.coronal.hi[5]);
  CHECK_FALSE(bad.valid());
  bad = cs;
  bad.sagittal.mid.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("raw curve CSV of any length resamples to kLevels") {
  testutil::TempDir dir("raw");
  std::string text = "x1,x2,x3,y1,y2,y3\n";
  for (int i = 0; i < 50; ++i) text += "90,100,110,95,100,105\n";
  write_text(dir.path() / "raw.csv", text);
  const CurveSet cs = read_raw_curves_csv(dir.path() / "raw.csv");
  CHECK(cs.coronal.mid.size() == static_cast<std::size_t>(kLevels));
  CHECK(cs.sagittal.hi[100] == doctest::Approx(105.0));
  CHECK_THROWS_AS(read_curveset_csv(dir.path() / "raw.csv"), IoError);
}
