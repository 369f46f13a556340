#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include <spine3d/metrics.hpp>
#include <spine3d/random.hpp>

using namespace spine3d;

TEST_CASE("MAE examples") {
  const std::vector<double> gt{1.0, 2.0, 3.0};
  CHECK(mae(gt, gt) == 0.0);
  CHECK(std::abs(mae(std::vector<double>{2.0, 2.0, 2.0}, gt) - 2.0 / 3.0) <= 1e-12);
  const std::vector<double> a{10.5, -3.0, 7.25}, b{9.0, -1.0, 7.0};
  const double base = mae(a, b);
  std::vector<double> a2 = a, b2 = b;
  for (double& v : a2) v += 123.456;
  for (double& v : b2) v += 123.456;
  CHECK(std::abs(mae(a2, b2) - base) <= 1e-12);
  CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(mae(std::vector<double>{1.0}, gt), std::invalid_argument);
}

TEST_CASE("relative error examples") {
  const std::vector<double> gt{3.0, 4.0};
  CHECK(relative_error(gt, gt) == 0.0);
  CHECK(std::abs(relative_error(std::vector<double>{2.0}, std::vector<double>{3.0}) - 0.5) <= 1e-12);
  // Hand computed: (|5-4|/4 + |1-2|/2) / 2 = 0.375.
  CHECK(std::abs(relative_error(std::vector<double>{4.0, 2.0}, std::vector<double>{5.0, 1.0}) - 0.375) <= 1e-12);
  const std::vector<double> p{2.0, 7.0, 0.5}, g{3.0, 6.0, 0.25};
  std::vector<double> pk = p, gk = g;
  for (double& v : pk) v *= 17.0;
  for (double& v : gk) v *= 17.0;
  CHECK(std::abs(relative_error(pk, gk) - relative_error(p, g)) <= 1e-12);
  // Not clamped at 1.
  CHECK(relative_error(std::vector<double>{1.0}, std::vector<double>{5.0}) == 4.0);
  CHECK_THROWS_AS(relative_error(std::vector<double>{0.0}, std::vector<double>{1.0}), std::domain_error);
}

TEST_CASE("IoU examples") {
  Mask2D a(6, 6), b(6, 6), c(6, 6);
  a.at(1, 1) = a.at(1, 2) = a.at(2, 1) = a.at(2, 2) = 1;
  b.at(1, 2) = b.at(1, 3) = b.at(2, 2) = b.at(2, 3) = 1;
  c.at(5, 5) = 1;
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, c) == 0.0);
  CHECK(iou(a, b) == 2.0 / 6.0);
  CHECK(iou(Mask2D(3, 3), Mask2D(3, 3)) == 1.0);
  CHECK_THROWS(iou(Mask2D(3, 3), Mask2D(3, 4)));
}

TEST_CASE("IoU equals brute-force counting on random masks") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int nz = uniform_int(rng, 1, 16), nx = uniform_int(rng, 1, 16), ny = uniform_int(rng, 1, 16);
    const double pa = uniform(rng, 0.0, 1.0), pb = uniform(rng, 0.0, 1.0);
    VoxelMask a(nz, nx, ny), b(nz, nx, ny);
    for (auto& v : a.data) v = uniform(rng, 0.0, 1.0) < pa;
    for (auto& v : b.data) v = uniform(rng, 0.0, 1.0) < pb;
    long inter = 0, uni = 0;
    for (int z = 0; z < nz; ++z)
      for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y) {
          inter += a.at(z, x, y) && b.at(z, x, y);
          uni += a.at(z, x, y) || b.at(z, x, y);
        }
    const double expected = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    REQUIRE(iou(a, b) == expected);
  }
}

TEST_CASE("mAP thresholds and examples") {
  for (int k = 0; k < kMapThresholds; ++k) CHECK(map_threshold(k) == doctest::Approx((k + 1) / 10.0).epsilon(1e-15));
  const auto ones = map_at_thresholds(std::vector<double>{1.0, 1.0, 1.0});
  for (double v : ones) CHECK(v == 1.0);
  const auto m = map_at_thresholds(std::vector<double>{0.85, 0.6, 0.3});
  CHECK(m[4] == doctest::Approx(2.0 / 3.0));  // tau = 0.5
  CHECK(m[6] == doctest::Approx(1.0 / 3.0));  // tau = 0.7
  CHECK(m[2] == 1.0);  // 0.3 >= tau = 0.3 is counted
  CHECK(m[8] == 0.0);
}

TEST_CASE("mAP is monotone non-increasing") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> ious(static_cast<std::size_t>(uniform_int(rng, 1, 40)));
    for (double& v : ious) v = uniform(rng, 0.0, 1.0);
    const auto m = map_at_thresholds(ious);
    for (int k = 1; k < kMapThresholds; ++k) REQUIRE(m[k] <= m[k - 1]);
  }
}

TEST_CASE("3D centreline deviation") {
  std::vector<Point3> gt;
  for (int z = 1; z <= 209; ++z) gt.push_back({100.0 + 0.1 * z, 110.0, static_cast<double>(z)});
  const Deviation zero = curve_deviation_3d(gt, gt);
  CHECK(zero.voxels == 0.0);
  CHECK(zero.mm == 0.0);
  std::vector<Point3> shifted = gt;
  for (Point3& p : shifted) p.x += 1.0;
  const Deviation d = curve_deviation_3d(shifted, gt);
  CHECK(d.voxels == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(d.mm == doctest::Approx(kDefaultVoxelSizeMm).epsilon(1e-14));
  // The reported pair 1.42 voxels / 3.12 mm fixes the voxel size.
  CHECK(1.42 * kDefaultVoxelSizeMm == doctest::Approx(3.12).epsilon(1e-3));
  CHECK_THROWS(curve_deviation_3d(std::vector<Point3>(2), std::vector<Point3>(3)));
}

TEST_CASE("summary statistics") {
  const Summary s = summarize(std::vector<double>{1.0, 2.0, 3.0, 10.0});
  CHECK(s.mean == 4.0);
  CHECK(s.median == 2.5);
  CHECK(s.sd == doctest::Approx(std::sqrt((9.0 + 4.0 + 1.0 + 36.0) / 4.0)));
  const Summary odd = summarize(std::vector<double>{5.0, 1.0, 3.0});
  CHECK(odd.median == 3.0);
}

TEST_CASE("metric CSV rows match the header") {
  MetricReport r;
  r.target = "coronal";
  r.samples = 3;
  CHECK(metric_csv_row(r).size() == metric_csv_header().size());
  CHECK(format_metric_text(r).find("coronal") != std::string::npos);
}
