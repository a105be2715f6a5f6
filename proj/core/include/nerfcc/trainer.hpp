// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/adam.hpp"
#include "nerfcc/field.hpp"
#include "nerfcc/manifest.hpp"
#include "nerfcc/renderer.hpp"

#include <string>
#include <vector>

namespace nerfcc {

enum class TrainMode { MlpOnly, Fused };

struct TrainConfig {
  TrainMode mode = TrainMode::MlpOnly;
  int steps = 2000;
  int batch_rays = 128;
  int n_depth = 32;
  double lr = 5e-4;
  uint64_t seed = 0;
  int checkpoint_interval = 0;  // 0 = final checkpoint only
  Rgb background = Rgb::Zero();

  MlpFieldConfig field;
  DecoderConfig decoder;
  VolumeGrid grid;
  int feature_width = 8;
  int volume_feature_width = 16;
  FusionParams::Mode fusion_mode = FusionParams::Mode::Gated;
  int kappa = 4;

  void validate() const;
};

struct TrainDataset {
  DatasetManifest manifest;
  std::vector<ImageBuffer> images;

  int n_images() const { return static_cast<int>(images.size()); }
};

/// Loads every manifest image; dimensions must match the declared camera.
TrainDataset load_dataset(const DatasetManifest& manifest);

struct RayBatch {
  std::vector<Ray> rays;
  std::vector<Rgb> gt;
  std::vector<int> image_index;
};

/// Uniform over all (image, pixel) pairs.
RayBatch sample_ray_batch(const TrainDataset& ds, RandomStream& rng, int batch_size);
/// Uniform over the pixels of one image (fused mode supervises the frame
/// currently being fused).
RayBatch sample_ray_batch_single_image(const TrainDataset& ds, RandomStream& rng, int batch_size,
                                       int image);

/// Batch-mean squared L2 color error, local term plus global term. Pass an
/// empty global list to omit the global term (mlp-only mode).
double loss_nerfcc(const std::vector<Rgb>& local_pixels, const std::vector<Rgb>& global_pixels,
                   const std::vector<Rgb>& gt_pixels);

struct LossRow {
  int64_t step = 0;
  double local = 0.0;
  double global_term = 0.0;
  double wall_seconds = 0.0;
};

struct TrainState {
  TrainConfig config;
  ParameterStore store;
  AdamState adam;
  int64_t step = 0;
  FeatureVolume global_volume;  // fused mode recurrent state
  std::vector<LossRow> history;
};

/// Creates all parameter tensors. The per-image lighting table starts from
/// the manifest's lighting entries when present, otherwise DC white.
TrainState init_train_state(const TrainConfig& config, const TrainDataset& ds);

/// The κ nearest cameras to camera `frame` by center distance (frame
/// included), ascending (distance, index); at most kappa entries.
std::vector<int> view_group(const TrainDataset& ds, int frame, int kappa);

struct StepLoss {
  double local = 0.0;
  double global_term = 0.0;
  double total = 0.0;
};

/// One optimizer step on a freshly sampled batch; returns the pre-step loss.
StepLoss train_step(TrainState& state, const TrainDataset& ds);

/// Full loop: steps, loss trace CSV (step, loss_local, loss_global,
/// wall_seconds), checkpoints at the configured interval, final checkpoint
/// "checkpoint.nfcc" (+ "global_volume.nfccvol" after a final full fusion
/// pass in fused mode) in out_dir.
TrainState train(const TrainDataset& ds, const TrainConfig& config, const std::string& out_dir);

/// A batch frozen for gradient checking: fixed rays, depths, frame/group and
/// the detached pre-step global volume.
struct FrozenBatch {
  RayBatch batch;
  std::vector<RaySampleSet> samples;
  int frame = 0;
  std::vector<int> group;
};
FrozenBatch freeze_batch(const TrainState& state, const TrainDataset& ds, int64_t step);

struct StepOutputs {
  StepLoss loss;
  // Stop-gradient normal bases actually used, one row per ray.
  MatX basis_local;
  MatX basis_global;
  // Fused-mode voxel updates to commit into the recurrent global volume.
  std::vector<int64_t> voxel_indices;
  MatX fused_features;
};

/// Evaluates the training loss on a frozen batch, optionally
/// accumulating parameter gradients. Basis overrides replay fixed
/// stop-gradient normals so central finite differences are exact.
StepOutputs eval_batch_loss(TrainState& state, const TrainDataset& ds, const FrozenBatch& frozen,
                            bool with_grad, const MatX* basis_local_override = nullptr,
                            const MatX* basis_global_override = nullptr);

/// Loss trace CSV writer shared by train() and the tools.
void write_loss_csv(const std::vector<LossRow>& history, const std::string& path);

}  // namespace nerfcc
