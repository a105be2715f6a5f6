// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace nerfcc {

namespace {

constexpr char kMagic[8] = {'N', 'F', 'C', 'C', '0', '0', '0', '1'};

struct RawTensor {
  std::vector<int> shape;
  std::vector<double> values;
};

void write_tensor(std::ofstream& out, const std::string& name, const std::vector<int>& shape,
                  const std::vector<double>& values) {
  const uint32_t name_len = static_cast<uint32_t>(name.size());
  out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
  out.write(name.data(), name_len);
  const uint32_t ndim = static_cast<uint32_t>(shape.size());
  out.write(reinterpret_cast<const char*>(&ndim), sizeof(ndim));
  for (int d : shape) {
    const int64_t dd = d;
    out.write(reinterpret_cast<const char*>(&dd), sizeof(dd));
  }
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> flat(std::initializer_list<double> v) { return std::vector<double>(v); }

}  // namespace

Checkpoint make_checkpoint(const TrainState& state, int n_images) {
  Checkpoint c;
  c.config = state.config;
  c.adam = state.adam;
  c.step = state.step;
  c.n_images = n_images;
  for (size_t i = 0; i < state.store.count(); ++i) {
    Tensor& t = c.store.add(state.store.name(i), state.store.tensor(i).shape);
    t.values = state.store.tensor(i).values;
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const TrainConfig& cfg = ckpt.config;

  std::vector<std::pair<std::string, RawTensor>> entries;
  for (size_t i = 0; i < ckpt.store.count(); ++i) {
    const Tensor& t = ckpt.store.tensor(i);
    entries.push_back({ckpt.store.name(i), {t.shape, t.values}});
  }
  for (size_t i = 0; i < ckpt.store.count(); ++i) {
    const std::string& name = ckpt.store.name(i);
    const Tensor& t = ckpt.store.tensor(i);
    auto m = ckpt.adam.m.find(name);
    auto v = ckpt.adam.v.find(name);
    entries.push_back(
        {"adam/m/" + name, {t.shape, m != ckpt.adam.m.end() ? m->second : std::vector<double>(t.size(), 0.0)}});
    entries.push_back(
        {"adam/v/" + name, {t.shape, v != ckpt.adam.v.end() ? v->second : std::vector<double>(t.size(), 0.0)}});
  }
  entries.push_back({"adam/step", {{1}, flat({static_cast<double>(ckpt.adam.step)})}});
  entries.push_back({"adam/hyper",
                     {{4},
                      flat({ckpt.adam.config.lr, ckpt.adam.config.beta1, ckpt.adam.config.beta2,
                            ckpt.adam.config.eps})}});

  entries.push_back({"config/mode", {{1}, flat({cfg.mode == TrainMode::Fused ? 1.0 : 0.0})}});
  entries.push_back({"config/step", {{1}, flat({static_cast<double>(ckpt.step)})}});
  entries.push_back({"config/n_images", {{1}, flat({static_cast<double>(ckpt.n_images)})}});
  entries.push_back({"config/n_depth", {{1}, flat({static_cast<double>(cfg.n_depth)})}});
  entries.push_back({"config/batch_rays", {{1}, flat({static_cast<double>(cfg.batch_rays)})}});
  entries.push_back(
      {"config/background", {{3}, flat({cfg.background[0], cfg.background[1], cfg.background[2]})}});
  entries.push_back({"config/n_freq", {{1}, flat({static_cast<double>(cfg.field.n_freq)})}});
  {
    std::vector<double> tw(cfg.field.trunk.begin(), cfg.field.trunk.end());
    entries.push_back({"config/field_trunk", {{static_cast<int>(tw.size())}, tw}});
  }
  {
    std::vector<double> dw(cfg.decoder.trunk.begin(), cfg.decoder.trunk.end());
    dw.push_back(cfg.decoder.trunk_out);
    entries.push_back({"config/decoder_trunk", {{static_cast<int>(dw.size())}, dw}});
  }
  entries.push_back({"config/grid",
                     {{7},
                      flat({cfg.grid.bound_min[0], cfg.grid.bound_min[1], cfg.grid.bound_min[2],
                            cfg.grid.bound_max[0], cfg.grid.bound_max[1], cfg.grid.bound_max[2],
                            static_cast<double>(cfg.grid.resolution)})}});
  entries.push_back({"config/feature_widths",
                     {{2},
                      flat({static_cast<double>(cfg.feature_width),
                            static_cast<double>(cfg.volume_feature_width)})}});
  entries.push_back(
      {"config/fusion_mode",
       {{1}, flat({cfg.fusion_mode == FusionParams::Mode::CountAverage ? 1.0 : 0.0})}});
  entries.push_back({"config/kappa", {{1}, flat({static_cast<double>(cfg.kappa)})}});
  entries.push_back({"config/lr", {{1}, flat({cfg.lr})}});
  entries.push_back({"config/seed",
                     {{2},
                      flat({static_cast<double>(cfg.seed >> 32),
                            static_cast<double>(cfg.seed & 0xffffffffull)})}});

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, 8);
  const uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const uint64_t count = entries.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, raw] : entries) write_tensor(out, name, raw.shape, raw.values);
  if (!out) throw DataError("write failure on checkpoint: " + path);
}

namespace {

std::map<std::string, RawTensor> read_all(const std::string& path,
                                          std::vector<std::string>& order) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not a checkpoint (bad magic): " + path);
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != 1) throw DataError("unsupported checkpoint version: " + path);
  uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));

  std::map<std::string, RawTensor> out;
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    if (!in || name_len > 4096) throw DataError("corrupt checkpoint: " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint32_t ndim = 0;
    in.read(reinterpret_cast<char*>(&ndim), sizeof(ndim));
    if (!in || ndim > 8) throw DataError("corrupt checkpoint: " + path);
    RawTensor raw;
    size_t n = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      int64_t dd = 0;
      in.read(reinterpret_cast<char*>(&dd), sizeof(dd));
      if (!in || dd < 1 || dd > (1 << 24)) throw DataError("corrupt checkpoint: " + path);
      raw.shape.push_back(static_cast<int>(dd));
      n *= static_cast<size_t>(dd);
    }
    raw.values.resize(n);
    in.read(reinterpret_cast<char*>(raw.values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint: " + path);
    order.push_back(name);
    out.emplace(std::move(name), std::move(raw));
  }
  return out;
}

const RawTensor& need(const std::map<std::string, RawTensor>& all, const std::string& name,
                      const std::string& path) {
  auto it = all.find(name);
  if (it == all.end()) throw DataError("checkpoint missing tensor '" + name + "': " + path);
  return it->second;
}

}  // namespace

Checkpoint load_checkpoint(const std::string& path) {
  std::vector<std::string> order;
  const auto all = read_all(path, order);

  Checkpoint c;
  TrainConfig& cfg = c.config;
  cfg.mode = need(all, "config/mode", path).values[0] != 0.0 ? TrainMode::Fused : TrainMode::MlpOnly;
  c.step = static_cast<int64_t>(need(all, "config/step", path).values[0]);
  c.n_images = static_cast<int>(need(all, "config/n_images", path).values[0]);
  cfg.n_depth = static_cast<int>(need(all, "config/n_depth", path).values[0]);
  cfg.batch_rays = static_cast<int>(need(all, "config/batch_rays", path).values[0]);
  {
    const auto& bg = need(all, "config/background", path).values;
    cfg.background = Rgb(bg[0], bg[1], bg[2]);
  }
  cfg.field.n_freq = static_cast<int>(need(all, "config/n_freq", path).values[0]);
  cfg.field.trunk.clear();
  for (double w : need(all, "config/field_trunk", path).values)
    cfg.field.trunk.push_back(static_cast<int>(w));
  {
    const auto& dw = need(all, "config/decoder_trunk", path).values;
    cfg.decoder.trunk.clear();
    for (size_t i = 0; i + 1 < dw.size(); ++i) cfg.decoder.trunk.push_back(static_cast<int>(dw[i]));
    cfg.decoder.trunk_out = static_cast<int>(dw.back());
  }
  {
    const auto& g = need(all, "config/grid", path).values;
    cfg.grid.bound_min = Vec3(g[0], g[1], g[2]);
    cfg.grid.bound_max = Vec3(g[3], g[4], g[5]);
    cfg.grid.resolution = static_cast<int>(g[6]);
  }
  {
    const auto& fw = need(all, "config/feature_widths", path).values;
    cfg.feature_width = static_cast<int>(fw[0]);
    cfg.volume_feature_width = static_cast<int>(fw[1]);
  }
  cfg.fusion_mode = need(all, "config/fusion_mode", path).values[0] != 0.0
                        ? FusionParams::Mode::CountAverage
                        : FusionParams::Mode::Gated;
  cfg.kappa = static_cast<int>(need(all, "config/kappa", path).values[0]);
  cfg.lr = need(all, "config/lr", path).values[0];
  {
    const auto& s = need(all, "config/seed", path).values;
    cfg.seed = (static_cast<uint64_t>(s[0]) << 32) | static_cast<uint64_t>(s[1]);
  }
  cfg.steps = static_cast<int>(c.step);

  c.adam.step = static_cast<int64_t>(need(all, "adam/step", path).values[0]);
  {
    const auto& h = need(all, "adam/hyper", path).values;
    c.adam.config.lr = h[0];
    c.adam.config.beta1 = h[1];
    c.adam.config.beta2 = h[2];
    c.adam.config.eps = h[3];
  }

  for (const std::string& name : order) {
    if (name.rfind("adam/", 0) == 0 || name.rfind("config/", 0) == 0) continue;
    const RawTensor& raw = all.at(name);
    Tensor& t = c.store.add(name, raw.shape);
    t.values = raw.values;
    auto m = all.find("adam/m/" + name);
    auto v = all.find("adam/v/" + name);
    if (m != all.end()) c.adam.m[name] = m->second.values;
    if (v != all.end()) c.adam.v[name] = v->second.values;
  }
  return c;
}

SHLighting lighting_from_store(const ParameterStore& store, int image_index) {
  const Tensor& t = store.at("lighting/" + std::to_string(image_index));
  SHLighting l;
  for (int k = 0; k < kShCoeffs; ++k)
    for (int c = 0; c < 3; ++c) l.coeff[k][c] = t.values[static_cast<size_t>(k) * 3 + c];
  return l;
}

SHLighting mean_lighting(const ParameterStore& store, int n_images) {
  if (n_images < 1) throw DataError("mean lighting over no images");
  SHLighting mean;
  for (int k = 0; k < kShCoeffs; ++k) mean.coeff[k] = Rgb::Zero();
  for (int i = 0; i < n_images; ++i) {
    const SHLighting l = lighting_from_store(store, i);
    for (int k = 0; k < kShCoeffs; ++k) mean.coeff[k] += l.coeff[k];
  }
  for (int k = 0; k < kShCoeffs; ++k) mean.coeff[k] /= static_cast<double>(n_images);
  return mean;
}

}  // namespace nerfcc
