// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nerfcc/field.hpp"
#include "nerfcc/fusion.hpp"
#include "nerfcc/gradcheck.hpp"
#include "testutil.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

using namespace nerfcc;
using nerfcc::test::ScratchDir;
using nerfcc::test::axis_camera;

namespace {

FusionParams tiny_params(FusionParams::Mode mode, uint64_t seed, int f = 3, int fv = 4) {
  return FusionParams::make(f, fv, mode, seed);
}

ImageBuffer gradient_image(int w, int h) {
  ImageBuffer im(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      im.set_pixel(x, y, Rgb(x / std::max(1.0, w - 1.0), y / std::max(1.0, h - 1.0), 0.25));
  return im;
}

}  // namespace

TEST_CASE("grid cell centers and linear indices are consistent") {
  VolumeGrid grid;
  grid.bound_min = Vec3(-2.0, -1.0, 0.0);
  grid.bound_max = Vec3(2.0, 1.0, 4.0);
  grid.resolution = 4;
  grid.validate();
  CHECK(grid.cell_size().isApprox(Vec3(1.0, 0.5, 1.0), 0.0));
  CHECK(grid.center(0, 0, 0).isApprox(Vec3(-1.5, -0.75, 0.5), 1e-15));
  CHECK(grid.center(3, 3, 3).isApprox(Vec3(1.5, 0.75, 3.5), 1e-15));
  const int64_t idx = grid.linear_index(1, 2, 3);
  CHECK(idx == (3 * 4 + 2) * 4 + 1);
  CHECK(grid.center(idx).isApprox(grid.center(1, 2, 3), 0.0));
  CHECK(grid.inside(Vec3(0.0, 0.0, 2.0)));
  CHECK_FALSE(grid.inside(Vec3(0.0, 1.1, 2.0)));

  VolumeGrid bad = grid;
  bad.resolution = 0;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = grid;
  bad.bound_max[0] = bad.bound_min[0];
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("trilinear stencil is exact at centers and midpoints") {
  VolumeGrid grid;
  grid.bound_min = Vec3::Constant(-1.0);
  grid.bound_max = Vec3::Constant(1.0);
  grid.resolution = 4;

  const TrilinearStencil at_center = trilinear_stencil(grid, grid.center(1, 2, 1));
  double wsum = 0.0;
  double center_w = 0.0;
  for (int k = 0; k < 8; ++k) {
    wsum += at_center.weight[k];
    if (at_center.index[k] == grid.linear_index(1, 2, 1)) center_w += at_center.weight[k];
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(center_w == doctest::Approx(1.0).epsilon(1e-12));

  const Vec3 mid = 0.5 * (grid.center(1, 1, 1) + grid.center(2, 1, 1));
  const TrilinearStencil at_mid = trilinear_stencil(grid, mid);
  double wa = 0.0, wb = 0.0;
  for (int k = 0; k < 8; ++k) {
    if (at_mid.index[k] == grid.linear_index(1, 1, 1)) wa += at_mid.weight[k];
    if (at_mid.index[k] == grid.linear_index(2, 1, 1)) wb += at_mid.weight[k];
  }
  CHECK(wa == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(wb == doctest::Approx(0.5).epsilon(1e-12));

  // Near the boundary some corners leave the lattice and carry index -1.
  const TrilinearStencil corner = trilinear_stencil(grid, Vec3::Constant(-0.999));
  bool has_missing = false;
  for (int k = 0; k < 8; ++k) has_missing |= corner.index[k] == -1;
  CHECK(has_missing);
}

TEST_CASE("project_for_sampling validity and bilinear weights") {
  const PinholeCamera cam = axis_camera(8, 8, 4.0, Vec3(0, 0, -4), 1.0, 8.0);

  CHECK_FALSE(project_for_sampling(cam, Vec3(0, 0, -6)).valid);    // behind
  CHECK_FALSE(project_for_sampling(cam, Vec3(50.0, 0, 0)).valid);  // off-image

  // A point on the exact pixel-center ray lands with weight 1 on that row.
  const Ray ray = cam.generate_ray(3, 5);
  const ViewSample vs = project_for_sampling(cam, ray.at(2.5));
  REQUIRE(vs.valid);
  double w_target = 0.0, wsum = 0.0;
  for (int k = 0; k < 4; ++k) {
    wsum += vs.weight[k];
    if (vs.row[k] == 5 * 8 + 3) w_target += vs.weight[k];
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w_target == doctest::Approx(1.0).epsilon(1e-9));

  // Halfway between two horizontal pixel centers: 0.5/0.5.
  const Ray r0 = cam.generate_ray(3, 5);
  const Ray r1 = cam.generate_ray(4, 5);
  const Vec3 p0 = r0.at(3.0);
  const Vec3 p1 = r1.at(3.0 * r0.direction.z() / r1.direction.z());
  const Vec3 half = 0.5 * (p0 + p1);  // same camera depth, halfway in x
  const ViewSample hs = project_for_sampling(cam, half);
  REQUIRE(hs.valid);
  double w0 = 0.0, w1 = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (hs.row[k] == 5 * 8 + 3) w0 += hs.weight[k];
    if (hs.row[k] == 5 * 8 + 4) w1 += hs.weight[k];
  }
  CHECK(w0 == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(w1 == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("encode_view matches its tape form and handles constants") {
  const FusionParams fp = tiny_params(FusionParams::Mode::Gated, substream(55, 1));
  ParameterStore store;
  fp.init_params(store);

  const ImageBuffer grad = gradient_image(5, 4);
  const MatX plain = encode_view_plain(store, fp, grad);
  REQUIRE(plain.rows() == 20);
  REQUIRE(plain.cols() == fp.feature_width);
  Tape tape;
  const Var taped = encode_view(tape, store, fp, grad);
  CHECK(tape.value(taped).isApprox(plain, 1e-14));

  // Replicate padding: a constant image encodes to identical rows.
  ImageBuffer flat(6, 3, Rgb(0.3, 0.6, 0.9));
  const MatX enc = encode_view_plain(store, fp, flat);
  for (int r = 1; r < enc.rows(); ++r)
    for (int c = 0; c < enc.cols(); ++c)
      CHECK(enc(r, c) == doctest::Approx(enc(0, c)).epsilon(1e-13));

  // Zero conv kernels and biases encode everything to zero.
  ParameterStore zeros;
  fp.init_params(zeros);
  for (size_t i = 0; i < zeros.count(); ++i)
    for (double& v : zeros.tensor(i).values) v = 0.0;
  const MatX z = encode_view_plain(zeros, fp, grad);
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encode_view gradients match finite differences") {
  const FusionParams fp = tiny_params(FusionParams::Mode::Gated, substream(55, 2), 2, 3);
  ParameterStore store;
  fp.init_params(store);
  const ImageBuffer img = gradient_image(4, 3);
  const LossFn f = [&](ParameterStore& p, bool with_grad) {
    Tape tape;
    const Var enc = encode_view(tape, p, fp, img);
    const Var loss = tape.sum_all(tape.mul(enc, enc));
    if (with_grad) {
      tape.backward(loss);
      tape.accumulate_param_grads();
    }
    return tape.value(loss)(0, 0);
  };
  CHECK(finite_diff_check(f, store) <= 1e-4);
}

TEST_CASE("sample_voxel_feature bilinearly blends feature rows") {
  const PinholeCamera cam = axis_camera(4, 4, 2.0, Vec3(0, 0, -3), 1.0, 6.0);
  MatX fmap(16, 2);
  for (int r = 0; r < 16; ++r) {
    fmap(r, 0) = r;
    fmap(r, 1) = 100.0 - r;
  }
  const Ray ray = cam.generate_ray(2, 1);
  const auto mu = sample_voxel_feature(fmap, cam, ray.at(2.0));
  REQUIRE(mu.has_value());
  CHECK((*mu)[0] == doctest::Approx(1 * 4 + 2).epsilon(1e-9));
  CHECK((*mu)[1] == doctest::Approx(100.0 - 6).epsilon(1e-9));
  CHECK_FALSE(sample_voxel_feature(fmap, cam, Vec3(0, 0, -5)).has_value());
}

TEST_CASE("aggregate_mean_var is permutation invariant and duplicate stable") {
  const FusionParams fp = tiny_params(FusionParams::Mode::Gated, substream(55, 3));
  ParameterStore store;
  fp.init_params(store);
  RandomStream rng(substream(55, 4));
  std::vector<VecX> feats;
  for (int i = 0; i < 5; ++i) {
    VecX v(fp.feature_width);
    for (int k = 0; k < fp.feature_width; ++k) v[k] = rng.uniform(-1.0, 1.0);
    feats.push_back(v);
  }
  const VecX base = aggregate_mean_var(feats, store, fp);
  std::vector<VecX> perm = {feats[3], feats[0], feats[4], feats[2], feats[1]};
  const VecX permuted = aggregate_mean_var(perm, store, fp);
  REQUIRE(base.size() == permuted.size());
  for (int k = 0; k < base.size(); ++k) CHECK(std::abs(base[k] - permuted[k]) <= 1e-15);

  // {mu, mu} has the same mean and variance as {mu}.
  const std::vector<VecX> once = {feats[0]};
  const std::vector<VecX> twice = {feats[0], feats[0]};
  const VecX a = aggregate_mean_var(once, store, fp);
  const VecX b = aggregate_mean_var(twice, store, fp);
  for (int k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);

  CHECK_THROWS_AS(aggregate_mean_var({}, store, fp), DataError);
}

TEST_CASE("aggregate_mean_var computes population statistics") {
  const FusionParams fp = tiny_params(FusionParams::Mode::Gated, substream(55, 5), 2, 3);
  ParameterStore store;
  fp.init_params(store);
  VecX f1(2), f2(2);
  f1 << 1.0, -2.0;
  f2 << 3.0, 4.0;
  const VecX got = aggregate_mean_var({f1, f2}, store, fp);

  VecX stats(4);
  stats << 2.0, 1.0, 1.0, 9.0;  // mean (2,1), population variance (1,9)
  const MatX manual = fp.aggregator.forward_plain(store, stats.transpose());
  REQUIRE(manual.cols() == got.size());
  for (int k = 0; k < got.size(); ++k)
    CHECK(got[k] == doctest::Approx(manual(0, k)).epsilon(1e-13));
}

TEST_CASE("build_local_volume marks only visible voxels") {
  const FusionParams fp = tiny_params(FusionParams::Mode::Gated, substream(55, 6));
  ParameterStore store;
  fp.init_params(store);
  VolumeGrid grid;
  grid.bound_min = Vec3::Constant(-1.0);
  grid.bound_max = Vec3::Constant(1.0);
  grid.resolution = 4;

  const PinholeCamera cam = axis_camera(8, 8, 8.0, Vec3(0, 0, -4), 2.0, 6.0);
  const ImageBuffer img = gradient_image(8, 8);
  const FeatureVolume vol = build_local_volume({img}, {cam}, store, fp, grid);
  CHECK(vol.feature_width == fp.volume_feature_width);
  CHECK(!vol.voxels.empty());

  // Every marked voxel is genuinely visible; every visible voxel is marked.
  const MatX fmap = encode_view_plain(store, fp, img);
  for (int iz = 0; iz < 4; ++iz)
    for (int iy = 0; iy < 4; ++iy)
      for (int ix = 0; ix < 4; ++ix) {
        const Vec3 c = grid.center(ix, iy, iz);
        const auto mu = sample_voxel_feature(fmap, cam, c);
        const FeatureVolume::Voxel* vox = vol.find(grid.linear_index(ix, iy, iz));
        CHECK(mu.has_value() == (vox != nullptr));
        if (mu && vox) {
          CHECK(vox->count == 1);
          const VecX want = aggregate_mean_var({*mu}, store, fp);
          REQUIRE(static_cast<int>(vox->feature.size()) == want.size());
          for (int k = 0; k < want.size(); ++k) CHECK(vox->feature[k] == want[k]);
        }
      }

  // A camera that looks away from the grid sees nothing.
  const PinholeCamera away = axis_camera(8, 8, 8.0, Vec3(0, 0, 4), 2.0, 6.0);
  const FeatureVolume none = build_local_volume({img}, {away}, store, fp, grid);
  CHECK(none.voxels.empty());
}

TEST_CASE("two identical co-located views fuse like one") {
  const FusionParams fp = tiny_params(FusionParams::Mode::Gated, substream(55, 7));
  ParameterStore store;
  fp.init_params(store);
  VolumeGrid grid;
  grid.resolution = 4;
  const PinholeCamera cam = axis_camera(8, 8, 8.0, Vec3(0, 0, -4), 2.0, 6.0);
  const ImageBuffer img = gradient_image(8, 8);
  const FeatureVolume one = build_local_volume({img}, {cam}, store, fp, grid);
  const FeatureVolume two = build_local_volume({img, img}, {cam, cam}, store, fp, grid);
  REQUIRE(one.voxels.size() == two.voxels.size());
  for (const auto& [idx, vox] : one.voxels) {
    const FeatureVolume::Voxel* other = two.find(idx);
    REQUIRE(other != nullptr);
    for (size_t k = 0; k < vox.feature.size(); ++k)
      CHECK(vox.feature[k] == doctest::Approx(other->feature[k]).epsilon(1e-12));
  }
}

TEST_CASE("count-average fusion is idempotent and averages exactly") {
  const FusionParams fp = tiny_params(FusionParams::Mode::CountAverage, substream(55, 8));
  ParameterStore store;
  fp.init_params(store);

  VolumeGrid grid;
  grid.resolution = 4;
  FeatureVolume global;
  global.grid = grid;
  global.feature_width = fp.volume_feature_width;
  FeatureVolume local = global;

  FeatureVolume::Voxel v;
  v.feature.assign(fp.volume_feature_width, 0.1);
  v.count = 1;
  local.voxels[7] = v;

  // New voxels are copied.
  FeatureVolume fused = fuse_global(global, local, store, fp);
  REQUIRE(fused.find(7) != nullptr);
  CHECK(fused.find(7)->count == 1);
  CHECK(fused.find(7)->feature == v.feature);

  // Fusing the identical local volume repeatedly never moves the value.
  for (int round = 0; round < 5; ++round) {
    fused = fuse_global(fused, local, store, fp);
    CHECK(fused.find(7)->count == round + 2);
    CHECK(fused.find(7)->feature == v.feature);
  }

  // 0 then 1 averages to 1/2 with count 2.
  FeatureVolume g2;
  g2.grid = grid;
  g2.feature_width = fp.volume_feature_width;
  FeatureVolume l0 = g2, l1 = g2;
  FeatureVolume::Voxel zero = v, one = v;
  zero.feature.assign(fp.volume_feature_width, 0.0);
  one.feature.assign(fp.volume_feature_width, 1.0);
  l0.voxels[3] = zero;
  l1.voxels[3] = one;
  FeatureVolume mid = fuse_global(fuse_global(g2, l0, store, fp), l1, store, fp);
  CHECK(mid.find(3)->count == 2);
  for (double x : mid.find(3)->feature) CHECK(x == 0.5);

  // A voxel absent from local is untouched.
  FeatureVolume l_empty = g2;
  const FeatureVolume same = fuse_global(mid, l_empty, store, fp);
  CHECK(same.find(3)->count == 2);
  CHECK(same.find(3)->feature == mid.find(3)->feature);
}

TEST_CASE("gated fusion saturates to the local value when the gate is open") {
  const FusionParams fp = tiny_params(FusionParams::Mode::Gated, substream(55, 9));
  ParameterStore store;
  fp.init_params(store);
  // Force the gate output to sigmoid(100) == 1 exactly.
  for (int l = 0; l < fp.gate.spec.layer_count(); ++l) {
    for (double& x : store.at(fp.gate.weight_name(l)).values) x = 0.0;
    Tensor& b = store.at(fp.gate.bias_name(l));
    const bool last = l == fp.gate.spec.layer_count() - 1;
    for (double& x : b.values) x = last ? 100.0 : 0.0;
  }

  VolumeGrid grid;
  grid.resolution = 4;
  FeatureVolume global;
  global.grid = grid;
  global.feature_width = fp.volume_feature_width;
  FeatureVolume::Voxel g;
  g.feature.assign(fp.volume_feature_width, -3.0);
  g.count = 4;
  global.voxels[11] = g;

  FeatureVolume local = global;
  local.voxels.clear();
  FeatureVolume::Voxel l;
  l.feature = {0.25, -0.5, 0.75, 1.5};
  l.count = 1;
  local.voxels[11] = l;

  const FeatureVolume fused = fuse_global(global, local, store, fp);
  CHECK(fused.find(11)->feature == l.feature);  // g==1 exactly
  CHECK(fused.find(11)->count == 5);

  // Grid mismatch is rejected.
  FeatureVolume other = local;
  other.grid.resolution = 8;
  CHECK_THROWS_AS(fuse_global(global, other, store, fp), DataError);
}

TEST_CASE("volume io round trips bitwise") {
  ScratchDir dir("vol");
  FeatureVolume vol;
  vol.grid.bound_min = Vec3(-1.5, -1.0, -0.5);
  vol.grid.bound_max = Vec3(0.5, 1.0, 2.5);
  vol.grid.resolution = 8;
  vol.feature_width = 3;
  RandomStream rng(substream(55, 10));
  for (int i = 0; i < 20; ++i) {
    FeatureVolume::Voxel v;
    for (int k = 0; k < 3; ++k) v.feature.push_back(rng.uniform(-2.0, 2.0));
    v.count = 1 + static_cast<int>(rng.below(9));
    vol.voxels[static_cast<int64_t>(rng.below(512))] = v;
  }
  save_volume(vol, dir.str("v.nfccvol"));
  const FeatureVolume back = load_volume(dir.str("v.nfccvol"));
  CHECK(back.grid.bound_min.isApprox(vol.grid.bound_min, 0.0));
  CHECK(back.grid.bound_max.isApprox(vol.grid.bound_max, 0.0));
  CHECK(back.grid.resolution == vol.grid.resolution);
  CHECK(back.feature_width == vol.feature_width);
  REQUIRE(back.voxels.size() == vol.voxels.size());
  for (const auto& [idx, v] : vol.voxels) {
    const FeatureVolume::Voxel* b = back.find(idx);
    REQUIRE(b != nullptr);
    CHECK(b->count == v.count);
    CHECK(b->feature == v.feature);
  }

  std::ofstream junk(dir.str("junk.nfccvol"), std::ios::binary);
  junk << "NOTAVOLUME";
  junk.close();
  CHECK_THROWS_AS(load_volume(dir.str("junk.nfccvol")), DataError);
  CHECK_THROWS_AS(load_volume(dir.str("missing.nfccvol")), DataError);
}

TEST_CASE("volume field is continuous across voxel boundaries") {
  DecoderConfig dc;
  dc.trunk = {8};
  dc.trunk_out = 8;
  dc.seed = substream(55, 11);
  const int fv = 3;
  ParameterStore store;
  VolumeField::init_params(dc, fv, store);

  FeatureVolume vol;
  vol.grid.resolution = 4;
  vol.feature_width = fv;
  RandomStream rng(substream(55, 12));
  for (int iz = 0; iz < 4; ++iz)
    for (int iy = 0; iy < 4; ++iy)
      for (int ix = 0; ix < 4; ++ix) {
        FeatureVolume::Voxel v;
        for (int k = 0; k < fv; ++k) v.feature.push_back(rng.uniform(-1.0, 1.0));
        v.count = 1;
        vol.voxels[vol.grid.linear_index(ix, iy, iz)] = v;
      }
  const VolumeField field(dc, fv, &store, &vol);

  // Probe across the plane between voxel columns 1 and 2.
  const double bx = 0.5 * (vol.grid.center(1, 2, 2)[0] + vol.grid.center(2, 2, 2)[0]);
  const Vec3 probe(bx, 0.1, 0.2);
  const double eps = 1e-9;
  const double left = field.query_density(probe - Vec3(eps, 0, 0));
  const double right = field.query_density(probe + Vec3(eps, 0, 0));
  CHECK(std::abs(left - right) <= 1e-6);
}
