// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/fusion.hpp"

#include "nerfcc/threading.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace nerfcc {

void VolumeGrid::validate() const {
  if (!finite(bound_min) || !finite(bound_max)) throw DataError("volume bounds not finite");
  if (!((bound_max - bound_min).array() > 0.0).all())
    throw DataError("volume bounds must have positive extent");
  if (resolution < 1) throw DataError("volume resolution must be >= 1");
}

TrilinearStencil trilinear_stencil(const VolumeGrid& grid, const Vec3& p) {
  TrilinearStencil st;
  const Vec3 cs = grid.cell_size();
  // Continuous lattice coordinates with voxel centers at integers.
  Vec3 g;
  for (int a = 0; a < 3; ++a) g[a] = (p[a] - grid.bound_min[a]) / cs[a] - 0.5;
  int base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor(g[a]);
    base[a] = static_cast<int>(f);
    frac[a] = g[a] - f;
  }
  int k = 0;
  for (int dz = 0; dz <= 1; ++dz)
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx, ++k) {
        const int ix = base[0] + dx, iy = base[1] + dy, iz = base[2] + dz;
        const double w = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
                         (dz ? frac[2] : 1.0 - frac[2]);
        const bool in = ix >= 0 && ix < grid.resolution && iy >= 0 && iy < grid.resolution &&
                        iz >= 0 && iz < grid.resolution;
        st.index[k] = in ? grid.linear_index(ix, iy, iz) : -1;
        st.weight[k] = w;
      }
  return st;
}

ViewSample project_for_sampling(const PinholeCamera& camera, const Vec3& p) {
  ViewSample vs;
  double px = 0.0, py = 0.0;
  if (!camera.project(p, px, py)) return vs;
  if (px < -0.5 || px > camera.width - 0.5 || py < -0.5 || py > camera.height - 0.5) return vs;
  const double fx = std::floor(px), fy = std::floor(py);
  const double ax = px - fx, ay = py - fy;
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  auto cl = [](int v, int hi) { return std::min(std::max(v, 0), hi); };
  const int xs[2] = {cl(x0, camera.width - 1), cl(x0 + 1, camera.width - 1)};
  const int ys[2] = {cl(y0, camera.height - 1), cl(y0 + 1, camera.height - 1)};
  const double wx[2] = {1.0 - ax, ax};
  const double wy[2] = {1.0 - ay, ay};
  int k = 0;
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i, ++k) {
      vs.row[k] = ys[j] * camera.width + xs[i];
      vs.weight[k] = wy[j] * wx[i];
    }
  vs.valid = true;
  return vs;
}

FusionParams FusionParams::make(int feature_width, int volume_feature_width, Mode mode,
                                uint64_t seed) {
  FusionParams fp;
  fp.feature_width = feature_width;
  fp.volume_feature_width = volume_feature_width;
  fp.mode = mode;
  const int f = feature_width, fv = volume_feature_width;
  fp.encoder1 = Mlp{MlpSpec{9 * 3, {}, f, {Act::None}, substream(seed, 0x656e63, 0)}, "enc0"};
  fp.encoder2 = Mlp{MlpSpec{9 * f, {}, f, {Act::None}, substream(seed, 0x656e63, 1)}, "enc1"};
  fp.aggregator =
      Mlp{MlpSpec{2 * f, {32}, fv, {Act::Softplus, Act::None}, substream(seed, 0x616767)}, "agg"};
  fp.gate = Mlp{MlpSpec{2 * fv, {32}, fv, {Act::Softplus, Act::Sigmoid}, substream(seed, 0x67617465)},
                "gate"};
  return fp;
}

void FusionParams::init_params(ParameterStore& store) const {
  encoder1.init_params(store);
  encoder2.init_params(store);
  aggregator.init_params(store);
  gate.init_params(store);
}

namespace {

MatX image_rows(const ImageBuffer& image) {
  MatX m(static_cast<int>(image.pixel_count()), 3);
  for (size_t i = 0; i < image.pixel_count(); ++i)
    for (int c = 0; c < 3; ++c) m(static_cast<int>(i), c) = image.data[i * 3 + c];
  return m;
}

MatX plain_conv3x3(const MatX& input, int height, int width, const MatX& kernel,
                   const Eigen::RowVectorXd& bias) {
  const int cin = static_cast<int>(input.cols());
  MatX patches(height * width, 9 * cin);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int row = y * width + x;
      int tap = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx, ++tap) {
          const int yy = std::min(std::max(y + dy, 0), height - 1);
          const int xx = std::min(std::max(x + dx, 0), width - 1);
          patches.block(row, tap * cin, 1, cin) = input.row(yy * width + xx);
        }
    }
  MatX out = patches * kernel;
  out.rowwise() += bias;
  return out;
}

MatX param_matrix(const ParameterStore& store, const std::string& name) {
  const Tensor& t = store.at(name);
  return Eigen::Map<const MatX>(t.values.data(), t.rows(), t.cols());
}

}  // namespace

MatX encode_view_plain(const ParameterStore& store, const FusionParams& fp,
                       const ImageBuffer& image) {
  const MatX rows = image_rows(image);
  const MatX k0 = param_matrix(store, fp.encoder1.weight_name(0));
  const MatX b0 = param_matrix(store, fp.encoder1.bias_name(0));
  const MatX k1 = param_matrix(store, fp.encoder2.weight_name(0));
  const MatX b1 = param_matrix(store, fp.encoder2.bias_name(0));
  MatX h = plain_conv3x3(rows, image.height, image.width, k0, b0.row(0));
  h = h.unaryExpr([](double x) { return softplus(x); });
  return plain_conv3x3(h, image.height, image.width, k1, b1.row(0));
}

Var encode_view(Tape& tape, ParameterStore& store, const FusionParams& fp,
                const ImageBuffer& image) {
  Var input = tape.constant(image_rows(image));
  Var k0 = tape.param(store, fp.encoder1.weight_name(0));
  Var b0 = tape.param(store, fp.encoder1.bias_name(0));
  Var k1 = tape.param(store, fp.encoder2.weight_name(0));
  Var b1 = tape.param(store, fp.encoder2.bias_name(0));
  Var h = tape.conv3x3(input, image.height, image.width, k0, b0);
  h = tape.softplus(h);
  return tape.conv3x3(h, image.height, image.width, k1, b1);
}

std::optional<VecX> sample_voxel_feature(const MatX& feature_map, const PinholeCamera& camera,
                                         const Vec3& voxel_center) {
  const ViewSample vs = project_for_sampling(camera, voxel_center);
  if (!vs.valid) return std::nullopt;
  VecX out = VecX::Zero(feature_map.cols());
  for (int k = 0; k < 4; ++k) out += vs.weight[k] * feature_map.row(vs.row[k]).transpose();
  return out;
}

VecX aggregate_mean_var(const std::vector<VecX>& features, const ParameterStore& store,
                        const FusionParams& fp) {
  if (features.empty()) throw DataError("aggregate_mean_var over no views");
  const int f = fp.feature_width;
  VecX mean = VecX::Zero(f), meansq = VecX::Zero(f);
  for (const VecX& mu : features) {
    if (mu.size() != f) throw DataError("feature width mismatch in aggregation");
    mean += mu;
    meansq += mu.cwiseProduct(mu);
  }
  const double inv = 1.0 / static_cast<double>(features.size());
  mean *= inv;
  meansq *= inv;
  MatX input(1, 2 * f);
  input.block(0, 0, 1, f) = mean.transpose();
  input.block(0, f, 1, f) = (meansq - mean.cwiseProduct(mean)).transpose();
  const MatX out = fp.aggregator.forward_plain(store, input);
  return out.row(0).transpose();
}

FeatureVolume build_local_volume(const std::vector<ImageBuffer>& images,
                                 const std::vector<PinholeCamera>& cameras,
                                 const ParameterStore& store, const FusionParams& fp,
                                 const VolumeGrid& grid) {
  if (images.empty() || images.size() != cameras.size())
    throw DataError("build_local_volume needs matching images and cameras");
  grid.validate();
  std::vector<MatX> maps;
  maps.reserve(images.size());
  for (const ImageBuffer& im : images) maps.push_back(encode_view_plain(store, fp, im));

  FeatureVolume vol;
  vol.grid = grid;
  vol.feature_width = fp.volume_feature_width;

  const int R = grid.resolution;
  std::vector<std::vector<std::pair<int64_t, FeatureVolume::Voxel>>> slabs(R);
  parallel_chunks(R, [&](int iz) {
    auto& out = slabs[iz];
    std::vector<VecX> mus;
    for (int iy = 0; iy < R; ++iy)
      for (int ix = 0; ix < R; ++ix) {
        const Vec3 c = grid.center(ix, iy, iz);
        mus.clear();
        for (size_t v = 0; v < images.size(); ++v)
          if (auto mu = sample_voxel_feature(maps[v], cameras[v], c)) mus.push_back(*mu);
        if (mus.empty()) continue;
        const VecX feat = aggregate_mean_var(mus, store, fp);
        FeatureVolume::Voxel vox;
        vox.feature.assign(feat.data(), feat.data() + feat.size());
        vox.count = 1;
        out.emplace_back(grid.linear_index(ix, iy, iz), std::move(vox));
      }
  });
  for (auto& slab : slabs)
    for (auto& [idx, vox] : slab) vol.voxels.emplace(idx, std::move(vox));
  return vol;
}

FeatureVolume fuse_global(const FeatureVolume& global, const FeatureVolume& local,
                          const ParameterStore& store, const FusionParams& fp) {
  if (global.grid.resolution != local.grid.resolution ||
      (global.grid.bound_min - local.grid.bound_min).norm() > 0.0 ||
      (global.grid.bound_max - local.grid.bound_max).norm() > 0.0)
    throw DataError("fuse_global volume grids differ");
  if (global.feature_width != local.feature_width)
    throw DataError("fuse_global feature widths differ");
  const int fv = global.feature_width;

  FeatureVolume out = global;
  for (const auto& [idx, lv] : local.voxels) {
    auto it = out.voxels.find(idx);
    if (it == out.voxels.end()) {
      out.voxels.emplace(idx, FeatureVolume::Voxel{lv.feature, 1});
      continue;
    }
    FeatureVolume::Voxel& gv = it->second;
    if (fp.mode == FusionParams::Mode::CountAverage) {
      // Incremental form of (n v_g + v_t)/(n+1): exact fixed point on
      // identical inputs.
      const double n = static_cast<double>(gv.count);
      for (int k = 0; k < fv; ++k)
        gv.feature[k] += (lv.feature[k] - gv.feature[k]) / (n + 1.0);
    } else {
      MatX in(1, 2 * fv);
      for (int k = 0; k < fv; ++k) {
        in(0, k) = gv.feature[k];
        in(0, fv + k) = lv.feature[k];
      }
      const MatX g = fp.gate.forward_plain(store, in);
      for (int k = 0; k < fv; ++k)
        gv.feature[k] = g(0, k) * lv.feature[k] + (1.0 - g(0, k)) * gv.feature[k];
    }
    gv.count += 1;
  }
  return out;
}

namespace {

constexpr char kVolMagic[8] = {'N', 'F', 'C', 'C', 'V', 'O', 'L', '1'};

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated volume snapshot: " + path);
  return v;
}

}  // namespace

void save_volume(const FeatureVolume& volume, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write volume snapshot: " + path);
  out.write(kVolMagic, 8);
  put<uint32_t>(out, 1);  // version
  for (int a = 0; a < 3; ++a) put<double>(out, volume.grid.bound_min[a]);
  for (int a = 0; a < 3; ++a) put<double>(out, volume.grid.bound_max[a]);
  put<uint32_t>(out, static_cast<uint32_t>(volume.grid.resolution));
  put<uint32_t>(out, static_cast<uint32_t>(volume.feature_width));
  put<uint64_t>(out, volume.voxels.size());

  std::vector<int64_t> order;
  order.reserve(volume.voxels.size());
  for (const auto& [idx, _] : volume.voxels) order.push_back(idx);
  std::sort(order.begin(), order.end());
  for (int64_t idx : order) {
    const FeatureVolume::Voxel& vox = volume.voxels.at(idx);
    put<int64_t>(out, idx);
    put<uint32_t>(out, static_cast<uint32_t>(vox.count));
    out.write(reinterpret_cast<const char*>(vox.feature.data()),
              static_cast<std::streamsize>(vox.feature.size() * sizeof(double)));
  }
  if (!out) throw DataError("write failure on volume snapshot: " + path);
}

FeatureVolume load_volume(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open volume snapshot: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kVolMagic, 8) != 0)
    throw DataError("not a volume snapshot (bad magic): " + path);
  const uint32_t version = get<uint32_t>(in, path);
  if (version != 1) throw DataError("unsupported volume snapshot version: " + path);
  FeatureVolume vol;
  for (int a = 0; a < 3; ++a) vol.grid.bound_min[a] = get<double>(in, path);
  for (int a = 0; a < 3; ++a) vol.grid.bound_max[a] = get<double>(in, path);
  vol.grid.resolution = static_cast<int>(get<uint32_t>(in, path));
  vol.feature_width = static_cast<int>(get<uint32_t>(in, path));
  vol.grid.validate();
  const uint64_t count = get<uint64_t>(in, path);
  for (uint64_t i = 0; i < count; ++i) {
    const int64_t idx = get<int64_t>(in, path);
    FeatureVolume::Voxel vox;
    vox.count = static_cast<int>(get<uint32_t>(in, path));
    vox.feature.resize(vol.feature_width);
    in.read(reinterpret_cast<char*>(vox.feature.data()),
            static_cast<std::streamsize>(vox.feature.size() * sizeof(double)));
    if (!in) throw DataError("truncated volume snapshot: " + path);
    vol.voxels.emplace(idx, std::move(vox));
  }
  return vol;
}

}  // namespace nerfcc
