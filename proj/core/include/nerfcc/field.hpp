// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/fusion.hpp"
#include "nerfcc/mlp.hpp"

namespace nerfcc {

/// Read-only density/albedo queries; the plain (non-tape) side used by
/// rendering, normals, and evaluation.
class RadianceField {
 public:
  virtual ~RadianceField() = default;

  /// sigma (n) and albedo (n x 3) at the given points.
  virtual void query_batch(const std::vector<Vec3>& points, VecX& sigma, MatX& albedo) const = 0;
  /// Density only; cheaper for normal estimation.
  virtual VecX density_batch(const std::vector<Vec3>& points) const = 0;

  double query_density(const Vec3& p) const;
  Rgb query_albedo(const Vec3& p) const;
};

struct MlpFieldConfig {
  int n_freq = 6;
  std::vector<int> trunk = {64, 64, 64, 64};
  uint64_t seed = 0;

  int encoded_width() const { return 3 + 6 * n_freq; }
};

/// MLP-backed field: positional encoding, softplus trunk, softplus density
/// head (bias initialized to -10, near-transparent start), sigmoid albedo
/// head. Parameters live under "field/..." in the store.
class MlpField : public RadianceField {
 public:
  MlpField(MlpFieldConfig config, const ParameterStore* store);

  static void init_params(const MlpFieldConfig& config, ParameterStore& store);

  void query_batch(const std::vector<Vec3>& points, VecX& sigma, MatX& albedo) const override;
  VecX density_batch(const std::vector<Vec3>& points) const override;

  /// Differentiable query over fixed points: (sigma n x 1, albedo n x 3).
  std::pair<Var, Var> eval(Tape& tape, ParameterStore& store,
                           const std::vector<Vec3>& points) const;
  /// Differentiable heads applied to an already-encoded input Var.
  std::pair<Var, Var> eval_encoded(Tape& tape, ParameterStore& store, Var encoded) const;

  const MlpFieldConfig& config() const { return config_; }

 private:
  MlpFieldConfig config_;
  Mlp trunk_, sigma_head_, albedo_head_;
  const ParameterStore* store_;
};

struct DecoderConfig {
  std::vector<int> trunk = {32};
  int trunk_out = 32;
  uint64_t seed = 0;
};

/// Volume-backed field: trilinear feature interpolation (missing voxels are
/// zero features) followed by a decoder MLP with the same head activations
/// as MlpField. Points outside the grid decode to sigma 0, albedo 0.5.
class VolumeField : public RadianceField {
 public:
  VolumeField(DecoderConfig config, int feature_width, const ParameterStore* store,
              const FeatureVolume* volume);

  static void init_params(const DecoderConfig& config, int feature_width, ParameterStore& store);

  void query_batch(const std::vector<Vec3>& points, VecX& sigma, MatX& albedo) const override;
  VecX density_batch(const std::vector<Vec3>& points) const override;

  /// Differentiable decode of gathered voxel features (n x F_v rows).
  std::pair<Var, Var> eval_features(Tape& tape, ParameterStore& store, Var features) const;

  const DecoderConfig& config() const { return config_; }

 private:
  MatX gather_features(const std::vector<Vec3>& points, std::vector<bool>& inside) const;

  DecoderConfig config_;
  Mlp trunk_, sigma_head_, albedo_head_;
  const ParameterStore* store_;
  const FeatureVolume* volume_;
};

}  // namespace nerfcc
