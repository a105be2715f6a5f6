// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/field.hpp"

namespace nerfcc {

double RadianceField::query_density(const Vec3& p) const {
  if (!finite(p)) throw NumericError("query at non-finite point");
  return density_batch({p})[0];
}

Rgb RadianceField::query_albedo(const Vec3& p) const {
  if (!finite(p)) throw NumericError("query at non-finite point");
  VecX sigma;
  MatX albedo;
  query_batch({p}, sigma, albedo);
  return Rgb(albedo(0, 0), albedo(0, 1), albedo(0, 2));
}

namespace {

Mlp make_trunk(const MlpFieldConfig& c) {
  std::vector<int> hidden(c.trunk.begin(), c.trunk.end() - 1);
  std::vector<Act> act(c.trunk.size(), Act::Softplus);
  return Mlp{MlpSpec{c.encoded_width(), hidden, c.trunk.back(), act, substream(c.seed, 0x74726b)},
             "field/trunk"};
}

Mlp make_sigma_head(int width, uint64_t seed, const std::string& prefix) {
  return Mlp{MlpSpec{width, {}, 1, {Act::Softplus}, substream(seed, 0x736967)}, prefix + "/sigma"};
}

Mlp make_albedo_head(int width, uint64_t seed, const std::string& prefix) {
  return Mlp{MlpSpec{width, {}, 3, {Act::Sigmoid}, substream(seed, 0x616c62)}, prefix + "/albedo"};
}

void check_points(const std::vector<Vec3>& points) {
  for (const Vec3& p : points)
    if (!finite(p)) throw NumericError("query at non-finite point");
}

}  // namespace

MlpField::MlpField(MlpFieldConfig config, const ParameterStore* store)
    : config_(std::move(config)),
      trunk_(make_trunk(config_)),
      sigma_head_(make_sigma_head(config_.trunk.back(), config_.seed, "field")),
      albedo_head_(make_albedo_head(config_.trunk.back(), config_.seed, "field")),
      store_(store) {
  if (config_.trunk.empty()) throw DataError("field trunk must have at least one layer");
}

void MlpField::init_params(const MlpFieldConfig& config, ParameterStore& store) {
  MlpField f(config, nullptr);
  f.trunk_.init_params(store);
  f.sigma_head_.init_params(store);
  f.albedo_head_.init_params(store);
  // Near-transparent start: softplus(-10) ~ 4.5e-5.
  store.at(f.sigma_head_.bias_name(0)).values[0] = -10.0;
}

void MlpField::query_batch(const std::vector<Vec3>& points, VecX& sigma, MatX& albedo) const {
  check_points(points);
  const MatX enc = pos_encode(points, config_.n_freq);
  const MatX h = trunk_.forward_plain(*store_, enc);
  sigma = sigma_head_.forward_plain(*store_, h).col(0);
  albedo = albedo_head_.forward_plain(*store_, h);
}

VecX MlpField::density_batch(const std::vector<Vec3>& points) const {
  check_points(points);
  const MatX enc = pos_encode(points, config_.n_freq);
  const MatX h = trunk_.forward_plain(*store_, enc);
  return sigma_head_.forward_plain(*store_, h).col(0);
}

std::pair<Var, Var> MlpField::eval(Tape& tape, ParameterStore& store,
                                   const std::vector<Vec3>& points) const {
  check_points(points);
  Var enc = tape.constant(pos_encode(points, config_.n_freq));
  return eval_encoded(tape, store, enc);
}

std::pair<Var, Var> MlpField::eval_encoded(Tape& tape, ParameterStore& store, Var encoded) const {
  Var h = trunk_.forward(tape, store, encoded);
  Var sigma = sigma_head_.forward(tape, store, h);
  Var albedo = albedo_head_.forward(tape, store, h);
  return {sigma, albedo};
}

VolumeField::VolumeField(DecoderConfig config, int feature_width, const ParameterStore* store,
                         const FeatureVolume* volume)
    : config_(std::move(config)),
      trunk_(Mlp{MlpSpec{feature_width, config_.trunk, config_.trunk_out,
                         std::vector<Act>(config_.trunk.size() + 1, Act::Softplus),
                         substream(config_.seed, 0x646563)},
                 "dec/trunk"}),
      sigma_head_(make_sigma_head(config_.trunk_out, config_.seed, "dec")),
      albedo_head_(make_albedo_head(config_.trunk_out, config_.seed, "dec")),
      store_(store),
      volume_(volume) {}

void VolumeField::init_params(const DecoderConfig& config, int feature_width,
                              ParameterStore& store) {
  VolumeField f(config, feature_width, nullptr, nullptr);
  f.trunk_.init_params(store);
  f.sigma_head_.init_params(store);
  f.albedo_head_.init_params(store);
  store.at(f.sigma_head_.bias_name(0)).values[0] = -10.0;
}

MatX VolumeField::gather_features(const std::vector<Vec3>& points, std::vector<bool>& inside) const {
  const int fv = volume_->feature_width;
  MatX feat = MatX::Zero(static_cast<int>(points.size()), fv);
  inside.assign(points.size(), false);
  for (size_t i = 0; i < points.size(); ++i) {
    if (!volume_->grid.inside(points[i])) continue;
    inside[i] = true;
    const TrilinearStencil st = trilinear_stencil(volume_->grid, points[i]);
    for (int k = 0; k < 8; ++k) {
      if (st.index[k] < 0) continue;
      const FeatureVolume::Voxel* vox = volume_->find(st.index[k]);
      if (!vox) continue;
      for (int c = 0; c < fv; ++c) feat(static_cast<int>(i), c) += st.weight[k] * vox->feature[c];
    }
  }
  return feat;
}

void VolumeField::query_batch(const std::vector<Vec3>& points, VecX& sigma, MatX& albedo) const {
  check_points(points);
  std::vector<bool> inside;
  const MatX feat = gather_features(points, inside);
  const MatX h = trunk_.forward_plain(*store_, feat);
  sigma = sigma_head_.forward_plain(*store_, h).col(0);
  albedo = albedo_head_.forward_plain(*store_, h);
  for (size_t i = 0; i < points.size(); ++i)
    if (!inside[i]) {
      sigma[static_cast<int>(i)] = 0.0;
      albedo.row(static_cast<int>(i)).setConstant(0.5);
    }
}

VecX VolumeField::density_batch(const std::vector<Vec3>& points) const {
  check_points(points);
  std::vector<bool> inside;
  const MatX feat = gather_features(points, inside);
  const MatX h = trunk_.forward_plain(*store_, feat);
  VecX sigma = sigma_head_.forward_plain(*store_, h).col(0);
  for (size_t i = 0; i < points.size(); ++i)
    if (!inside[i]) sigma[static_cast<int>(i)] = 0.0;
  return sigma;
}

std::pair<Var, Var> VolumeField::eval_features(Tape& tape, ParameterStore& store,
                                               Var features) const {
  Var h = trunk_.forward(tape, store, features);
  Var sigma = sigma_head_.forward(tape, store, h);
  Var albedo = albedo_head_.forward(tape, store, h);
  return {sigma, albedo};
}

}  // namespace nerfcc
