// Prints the quantile of max lateral deviation over the default phantom sampler.
// The 0.8 quantile is the scoliosis threshold that labels ~20% of phantoms.

#include <algorithm>
#include <cstdio>
#include <vector>

#include <CLI11.hpp>

#include "spine3d/phantom.hpp"
#include "spine3d/random.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Calibrate the scoliosis label threshold"};
  int n = 20000;
  double quantile = 0.8;
  std::uint64_t seed = 20240;
  app.add_option("-n", n, "Phantoms to sample")->check(CLI::PositiveNumber);
  app.add_option("-q,--quantile", quantile, "Quantile")->check(CLI::Range(0.0, 1.0));
  app.add_option("--seed", seed, "Base seed");
  CLI11_PARSE(app, argc, argv);

  const spine3d::PhantomConfig cfg;
  std::vector<double> dev;
  dev.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    dev.push_back(spine3d::sample_phantom(cfg, spine3d::derive_seed(seed, {static_cast<std::uint64_t>(i)}))
                      .max_lateral_deviation());
  std::sort(dev.begin(), dev.end());
  const auto k = static_cast<std::size_t>(quantile * (dev.size() - 1));
  std::printf("samples %d  min %.4f  median %.4f  max %.4f\n", n, dev.front(), dev[dev.size() / 2], dev.back());
  std::printf("quantile %.3f  threshold %.4f\n", quantile, dev[k]);
  return 0;
}
