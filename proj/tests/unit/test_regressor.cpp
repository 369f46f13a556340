#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spine3d/regressor.hpp>

#include "../common/gradcheck.hpp"

using namespace spine3d;

TEST_CASE("default config reduces 224x224 to 49 tokens") {
  const ModelConfig cfg;
  CHECK(cfg.grid_size() == 7);
  CHECK(cfg.token_count() == 49);
  CHECK(cfg.feature_dim() == 128);
  CHECK(cfg.outputs() == 209 * 6);
  RegressorModel m(cfg);
  std::size_t total = 0;
  for (const ParamBlock& b : m.blocks()) {
    CHECK(b.offset == total);
    total += b.size;
  }
  CHECK(total == m.parameter_count());
}

TEST_CASE("config validation") {
  ModelConfig cfg;
  cfg.conv_stages.pop_back();  // 14x14 grid
  CHECK_THROWS_AS(RegressorModel{cfg}, std::invalid_argument);
  cfg = ModelConfig{};
  cfg.attn_heads = 3;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ModelConfig{};
  cfg.dropout_p = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ModelConfig{};
  cfg.conv_stages[0].stride = 3;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("zero head weights output the head bias") {
  const ModelConfig cfg = testutil::miniature_config();
  RegressorModel m(cfg);
  m.initialize(3);
  const ParamLayout& L = m.layout();
  for (int i = 0; i < cfg.outputs(); ++i) {
    for (int d = 0; d < cfg.feature_dim(); ++d) m.parameters()[L.wh + d * cfg.outputs() + i] = 0.0;
    m.parameters()[L.bh + i] = 0.5 * i - 1.0;
  }
  const std::vector<double> out = forward(m, Image2D(8, 8), Mode::Eval);
  for (int i = 0; i < cfg.outputs(); ++i) CHECK(out[i] == 0.5 * i - 1.0);

  std::vector<double> off(static_cast<std::size_t>(cfg.outputs()), 100.0);
  m.set_output_offset(off);
  const std::vector<double> shifted = forward(m, Image2D(8, 8), Mode::Eval);
  for (int i = 0; i < cfg.outputs(); ++i) CHECK(shifted[i] == 100.0 + 0.5 * i - 1.0);
}

TEST_CASE("eval forward is deterministic") {
  RegressorModel m;
  m.initialize(4);
  const Image2D img = testutil::random_image(224, 5);
  CHECK(forward(m, img, Mode::Eval) == forward(m, img, Mode::Eval));
}

TEST_CASE("forward rejects bad input") {
  RegressorModel m(testutil::miniature_config());
  m.initialize(1);
  CHECK_THROWS_AS(forward(m, Image2D(9, 8), Mode::Eval), std::invalid_argument);
  Image2D img(8, 8);
  img.at(2, 3) = std::nan("");
  CHECK_THROWS_AS(forward(m, img, Mode::Eval), std::invalid_argument);
  ModelConfig cfg = testutil::miniature_config();
  cfg.dropout_p = 0.5;
  RegressorModel d(cfg);
  CHECK_THROWS_AS(forward(d, Image2D(8, 8), Mode::Train), std::invalid_argument);
}

TEST_CASE("attention without position bias is permutation invariant after pooling") {
  ModelConfig cfg;
  cfg.use_pos_encoding = false;
  RegressorModel m(cfg);
  m.initialize(6);
  for (std::size_t i = m.layout().bq; i < m.layout().bo + 128; ++i) m.parameters()[i] = 0.01 * std::sin(0.37 * i);
  const int N = cfg.token_count(), D = cfg.feature_dim();
  Rng rng(7);
  std::vector<double> tokens(static_cast<std::size_t>(N * D));
  for (double& v : tokens) v = uniform(rng, 0.0, 2.0);
  std::vector<int> perm(N);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> permuted(tokens.size());
  for (int i = 0; i < N; ++i)
    std::copy_n(tokens.begin() + perm[i] * D, D, permuted.begin() + i * D);
  const std::vector<double> a = attention_pooled(m, tokens), b = attention_pooled(m, permuted);
  REQUIRE(a.size() == static_cast<std::size_t>(D));
  for (int d = 0; d < D; ++d) CHECK(a[d] == doctest::Approx(b[d]).epsilon(1e-12));
}

TEST_CASE("relative position bias breaks permutation invariance") {
  ModelConfig cfg;
  RegressorModel m(cfg);
  m.initialize(6);
  const std::size_t span = static_cast<std::size_t>(cfg.attn_heads) * (2 * cfg.grid_size() - 1);
  for (std::size_t i = 0; i < span; ++i) m.parameters()[m.layout().rel_row + i] = 0.5 * std::cos(1.3 * i);
  const int N = cfg.token_count(), D = cfg.feature_dim();
  Rng rng(8);
  std::vector<double> tokens(static_cast<std::size_t>(N * D));
  for (double& v : tokens) v = uniform(rng, 0.0, 2.0);
  // Swap grid positions (0,0) and (1,3), which differ in row offset.
  std::vector<double> shuffled = tokens;
  std::swap_ranges(shuffled.begin(), shuffled.begin() + D, shuffled.begin() + 10 * D);
  const std::vector<double> a = attention_pooled(m, tokens), c = attention_pooled(m, shuffled);
  double diff = 0.0;
  for (int d = 0; d < D; ++d) diff = std::max(diff, std::abs(a[d] - c[d]));
  CHECK(diff > 1e-9);
}

TEST_CASE("train-mode dropout matches eval output in expectation") {
  ModelConfig cfg = testutil::miniature_config();
  cfg.conv_stages = {{8, 2}, {16, 2}};
  cfg.attn_heads = 4;
  cfg.dropout_p = 0.3;
  RegressorModel m(cfg);
  m.initialize(9);
  const Image2D img = testutil::random_image(8, 10);
  const std::vector<double> eval = forward(m, img, Mode::Eval);
  std::vector<double> mean(eval.size(), 0.0);
  const int n = 20000;
  Rng rng(11);
  for (int i = 0; i < n; ++i) {
    const std::vector<double> out = forward(m, img, Mode::Train, nullptr, &rng);
    for (std::size_t j = 0; j < out.size(); ++j) mean[j] += out[j] / n;
  }
  // Compare the dropout-affected part (outputs minus head bias) in norm.
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < eval.size(); ++j) {
    const double bias = m.parameters()[m.layout().bh + j];
    num += (mean[j] - eval[j]) * (mean[j] - eval[j]);
    den += (eval[j] - bias) * (eval[j] - bias);
  }
  CHECK(std::sqrt(num / den) < 0.02);
}

TEST_CASE("dropout with the same rng seed is reproducible") {
  ModelConfig cfg = testutil::miniature_config();
  cfg.dropout_p = 0.3;
  RegressorModel m(cfg);
  m.initialize(12);
  const Image2D img = testutil::random_image(8, 13);
  Rng a(5), b(5);
  CHECK(forward(m, img, Mode::Train, nullptr, &a) == forward(m, img, Mode::Train, nullptr, &b));
}

TEST_CASE("analytic gradients match central differences") {
  SUBCASE("attention with relative position bias") {
    const testutil::GradCheckResult r = testutil::gradient_check(testutil::miniature_config(), 21);
    INFO("worst block: " << r.worst_block);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error < 1e-4);
  }
  SUBCASE("attention without position bias, no coordinate channels") {
    ModelConfig cfg = testutil::miniature_config();
    cfg.use_pos_encoding = false;
    cfg.coord_channels = false;
    const testutil::GradCheckResult r = testutil::gradient_check(cfg, 22);
    INFO("worst block: " << r.worst_block);
    CHECK(r.max_rel_error < 1e-4);
  }
  SUBCASE("conv only, stride 1 stage") {
    ModelConfig cfg = testutil::miniature_config();
    cfg.use_attention = false;
    cfg.conv_stages = {{4, 1}, {6, 2}};
    const testutil::GradCheckResult r = testutil::gradient_check(cfg, 23);
    INFO("worst block: " << r.worst_block);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("backward under a fixed dropout mask matches finite differences") {
  ModelConfig cfg = testutil::miniature_config();
  cfg.dropout_p = 0.4;
  RegressorModel m(cfg);
  m.initialize(31);
  const Image2D img = testutil::random_image(8, 32);
  std::vector<double> c(static_cast<std::size_t>(cfg.outputs()));
  Rng rng(33);
  for (double& v : c) v = uniform(rng, -1.0, 1.0);
  auto loss = [&]() {
    Rng d(99);
    const std::vector<double> out = forward(m, img, Mode::Train, nullptr, &d);
    return std::inner_product(out.begin(), out.end(), c.begin(), 0.0);
  };
  ForwardTape tape;
  Rng d(99);
  forward(m, img, Mode::Train, &tape, &d);
  std::vector<double> grad(m.parameter_count(), 0.0);
  backward(m, tape, c, grad);
  double worst = 0.0;
  for (std::size_t i = 0; i < m.parameter_count(); ++i) {
    double& w = m.parameters()[i];
    const double keep = w;
    w = keep + 1e-4;
    const double up = loss();
    w = keep - 1e-4;
    const double down = loss();
    w = keep;
    const double numeric = (up - down) / 2e-4;
    worst = std::max(worst, std::abs(grad[i] - numeric) / std::max({std::abs(grad[i]), std::abs(numeric), 1e-7}));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("L1 loss examples") {
  RegressorModel m(testutil::miniature_config());
  m.initialize(1);
  const std::vector<double> t{1.0, -2.0, 3.5};
  CHECK(l1_loss(t, t, m, 0.0) == 0.0);
  CHECK(l1_loss(std::vector<double>{2.0, -1.0, 4.5}, t, m, 0.0) == 1.0);
  CHECK(l1_data_loss(std::vector<double>{1.0, 2.0}, std::vector<double>{2.0, 4.0}) == 1.5);
  double sq = 0.0;
  for (double w : m.parameters()) sq += w * w;
  CHECK(l1_loss(t, t, m, 0.25) == doctest::Approx(0.25 * sq).epsilon(1e-14));
  CHECK_THROWS(l1_data_loss(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}));
}

TEST_CASE("penalty gradient is 2 * penalty * parameter") {
  RegressorModel m(testutil::miniature_config());
  m.initialize(2);
  std::vector<double> g(m.parameter_count(), 0.0);
  add_penalty_grad(m, 1e-3, g);
  for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(g[i] == 2.0 * 1e-3 * m.parameters()[i]);
}

TEST_CASE("zero loss gives a zero head-bias gradient") {
  RegressorModel m(testutil::miniature_config());
  m.initialize(3);
  const Image2D img = testutil::random_image(8, 4);
  ForwardTape tape;
  const std::vector<double> out = forward(m, img, Mode::Eval, &tape);
  const std::vector<double> d = l1_loss_grad(out, out);
  CHECK(std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; }));
  std::vector<double> g(m.parameter_count(), 0.0);
  backward(m, tape, d, g);
  for (int i = 0; i < m.config().outputs(); ++i) CHECK(g[m.layout().bh + i] == 0.0);
  const std::vector<double> s = l1_loss_grad(std::vector<double>{3.0, 1.0}, std::vector<double>{1.0, 3.0});
  CHECK(s[0] == 0.5);
  CHECK(s[1] == -0.5);
}

TEST_CASE("curveset_from_outputs ordering") {
  CurveSet cs = CurveSet::zeros();
  for (int z = 0; z < kLevels; ++z) {
    cs.coronal.lo[z] = 90.0 + 0.01 * z;
    cs.coronal.mid[z] = 100.0;
    cs.coronal.hi[z] = 110.0;
    cs.sagittal.lo[z] = 95.0;
    cs.sagittal.mid[z] = 100.5;
    cs.sagittal.hi[z] = 106.0;
  }
  SUBCASE("ordered output is unchanged") { CHECK(curveset_from_outputs(flatten(cs)) == cs); }
  SUBCASE("an inverted pair is swapped") {
    std::vector<double> raw = flatten(cs);
    std::swap(raw[17 * kCurves + 0], raw[17 * kCurves + 2]);
    const CurveSet out = curveset_from_outputs(raw);
    CHECK(out == cs);
  }
  SUBCASE("out of frame and non-finite values are repaired") {
    std::vector<double> raw = flatten(cs);
    raw[5 * kCurves + 3] = -40.0;
    raw[6 * kCurves + 5] = 500.0;
    raw[7 * kCurves + 1] = std::nan("");
    CHECK(curveset_from_outputs(raw).valid());
  }
}

TEST_CASE("predictions always satisfy the curve invariants") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    RegressorModel m;
    m.initialize(seed);
    // Large random head bias to push raw outputs across orderings and frame edges.
    Rng rng(seed + 100);
    for (int i = 0; i < m.config().outputs(); ++i) m.parameters()[m.layout().bh + i] = uniform(rng, -300.0, 500.0);
    const CurveSet cs = predict_curveset(m, testutil::random_image(224, seed));
    CHECK(cs.valid());
  }
}

TEST_CASE("flatten is level-major") {
  CurveSet cs = CurveSet::zeros();
  cs.sagittal.mid[2] = 7.0;
  const std::vector<double> v = flatten(cs);
  CHECK(v.size() == static_cast<std::size_t>(kLevels * kCurves));
  CHECK(v[2 * kCurves + 4] == 7.0);
}
