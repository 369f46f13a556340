#include <benchmark/benchmark.h>

#include <spine3d/curves.hpp>
#include <spine3d/phantom.hpp>
#include <spine3d/random.hpp>
#include <spine3d/reconstruction.hpp>
#include <spine3d/registration.hpp>
#include <spine3d/regressor.hpp>

using namespace spine3d;

namespace {

const SpinePhantom& phantom() {
  static const SpinePhantom p = sample_phantom(PhantomConfig{}, 42);
  return p;
}

Image2D render() {
  const VoxelMask vol = rasterize(phantom());
  return render_pseudo_dxa(phantom(), vol).grid;
}

void BM_Rasterize(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(rasterize(phantom()));
}
BENCHMARK(BM_Rasterize)->Unit(benchmark::kMillisecond);

void BM_RenderPseudoDxa(benchmark::State& state) {
  const VoxelMask vol = rasterize(phantom());
  for (auto _ : state) benchmark::DoNotOptimize(render_pseudo_dxa(phantom(), vol));
}
BENCHMARK(BM_RenderPseudoDxa)->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
  const CurveSet curves = curves_from_volume(rasterize(phantom()));
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct_volume(curves));
}
BENCHMARK(BM_Reconstruct)->Unit(benchmark::kMillisecond);

void BM_Stage1(benchmark::State& state) {
  const Image2D fixed = render();
  const Image2D moving = apply_transform(RigidTransform2D{0.8, 3.0, -2.0},
                                         to_crop_frame(sum_projection(rasterize(phantom()), Plane::Coronal)));
  for (auto _ : state) benchmark::DoNotOptimize(stage1_image_align(fixed, moving));
}
BENCHMARK(BM_Stage1)->Unit(benchmark::kMillisecond);

void BM_AlignPair(benchmark::State& state) {
  const VoxelMask vol = rasterize(phantom());
  const Image2D fixed = render();
  const Mask2D mask = to_crop_frame(project(vol, Plane::Coronal));
  const RigidTransform2D t{0.8, 3.0, -2.0};
  const Image2D moving = apply_transform(t, to_crop_frame(sum_projection(vol, Plane::Coronal)));
  const Mask2D moving_mask = apply_transform(t, mask);
  for (auto _ : state) benchmark::DoNotOptimize(align_pair(fixed, moving, mask, moving_mask));
}
BENCHMARK(BM_AlignPair)->Unit(benchmark::kMillisecond);

void BM_Forward(benchmark::State& state) {
  RegressorModel model;
  model.initialize(1);
  const Image2D image = render();
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, image, Mode::Eval));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

// One training sample step: forward with tape, L1 gradient, backward.
void BM_ForwardBackward(benchmark::State& state) {
  RegressorModel model;
  model.initialize(1);
  const Image2D image = render();
  const std::vector<double> target(static_cast<std::size_t>(model.config().outputs()), 100.0);
  AlignedBuffer grad(model.parameter_count());
  Rng rng(3);
  for (auto _ : state) {
    ForwardTape tape;
    const std::vector<double> pred = forward(model, image, Mode::Train, &tape, &rng);
    backward(model, tape, l1_loss_grad(pred, target), grad);
    benchmark::DoNotOptimize(grad.data());
  }
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
