// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/fusion.hpp"
#include "nerfcc/kernels.hpp"
#include "nerfcc/metrics.hpp"
#include "nerfcc/renderer.hpp"
#include "nerfcc/sh.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

using namespace nerfcc;

namespace {

ImageBuffer random_image(int w, int h, RandomStream& rng) {
  ImageBuffer img(w, h);
  for (double& v : img.data) v = rng.uniform01();
  return img;
}

void BM_CompositeWeights(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  RandomStream rng(1);
  std::vector<double> sigma(n), delta(n);
  for (int i = 0; i < n; ++i) {
    sigma[i] = rng.uniform(0.0, 3.0);
    delta[i] = rng.uniform(0.01, 0.2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(composite_weights(sigma, delta));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_CompositeWeights)->Arg(32)->Arg(256);

void BM_ShBasis(benchmark::State& state) {
  RandomStream rng(2);
  std::vector<Vec3> dirs;
  for (int i = 0; i < 1024; ++i) {
    Vec3 d;
    do {
      d = Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    } while (d.squaredNorm() < 1e-6 || d.squaredNorm() > 1.0);
    dirs.push_back(d.normalized());
  }
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sh_basis(dirs[i]));
    i = (i + 1) % dirs.size();
  }
}
BENCHMARK(BM_ShBasis);

void BM_FieldQueryBatch(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  MlpFieldConfig cfg;
  ParameterStore store;
  MlpField::init_params(cfg, store);
  const MlpField field(cfg, &store);
  RandomStream rng(3);
  std::vector<Vec3> points;
  for (int i = 0; i < n; ++i)
    points.emplace_back(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  VecX sigma;
  MatX albedo;
  for (auto _ : state) {
    field.query_batch(points, sigma, albedo);
    benchmark::DoNotOptimize(sigma);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_FieldQueryBatch)->Arg(1024)->Arg(8192);

void BM_EncodeView(benchmark::State& state) {
  const FusionParams fp = FusionParams::make(8, 16, FusionParams::Mode::Gated, 4);
  ParameterStore store;
  fp.init_params(store);
  RandomStream rng(5);
  const ImageBuffer img = random_image(64, 64, rng);
  for (auto _ : state) benchmark::DoNotOptimize(encode_view_plain(store, fp, img));
  state.SetItemsProcessed(state.iterations() * img.pixel_count());
}
BENCHMARK(BM_EncodeView);

void BM_RenderPixel(benchmark::State& state) {
  MlpFieldConfig cfg;
  cfg.trunk = {32, 32};
  ParameterStore store;
  MlpField::init_params(cfg, store);
  const MlpField field(cfg, &store);
  RenderOptions opts;
  opts.n_depth = static_cast<int>(state.range(0));
  Ray ray;
  ray.origin = Vec3(0.0, 0.0, -4.0);
  ray.direction = Vec3(0.0, 0.0, 1.0);
  ray.near = 2.0;
  ray.far = 6.0;
  const SHLighting white = SHLighting::dc_white();
  uint64_t pixel = 0;
  for (auto _ : state) {
    RandomStream rng(substream(9, streams::kPixel, pixel++));
    benchmark::DoNotOptimize(render_pixel(field, white, ray, opts, rng));
  }
}
BENCHMARK(BM_RenderPixel)->Arg(16)->Arg(64);

void BM_ComputeCd(benchmark::State& state) {
  RandomStream rng(6);
  std::vector<ImageBuffer> images;
  for (int i = 0; i < 4; ++i) images.push_back(random_image(64, 64, rng));
  std::vector<OverlapMask> overlaps;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      Mask m = make_mask(64, 64);
      for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) m.set(x, y, rng.uniform01() < 0.5);
      overlaps.push_back({i, j, m});
    }
  for (auto _ : state) benchmark::DoNotOptimize(compute_cd(images, overlaps, 256));
}
BENCHMARK(BM_ComputeCd);

}  // namespace

BENCHMARK_MAIN();
