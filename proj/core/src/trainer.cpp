// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/trainer.hpp"

#include "nerfcc/checkpoint.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_map>

namespace nerfcc {

void TrainConfig::validate() const {
  if (steps < 0) throw UsageError("steps must be >= 0");
  if (batch_rays < 1) throw UsageError("batch_rays must be >= 1");
  if (n_depth < 2) throw UsageError("n_depth must be >= 2");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw UsageError("lr must be non-negative and finite");
  if (checkpoint_interval < 0) throw UsageError("checkpoint_interval must be >= 0");
  if (!background.isFinite().all()) throw UsageError("background color must be finite");
  if (field.n_freq < 0 || field.n_freq > 32) throw UsageError("n_freq out of range");
  if (field.trunk.empty()) throw UsageError("field trunk must have at least one layer");
  if (mode == TrainMode::Fused) {
    grid.validate();
    if (feature_width < 1) throw UsageError("feature_width must be >= 1");
    if (volume_feature_width < 1) throw UsageError("volume_feature_width must be >= 1");
    if (kappa < 1) throw UsageError("kappa must be >= 1");
    if (decoder.trunk_out < 1) throw UsageError("decoder trunk output must be >= 1");
  }
}

TrainDataset load_dataset(const DatasetManifest& manifest) {
  manifest.validate();
  TrainDataset ds;
  ds.manifest = manifest;
  ds.images.reserve(manifest.images.size());
  for (const ManifestImage& mi : manifest.images) {
    ImageBuffer img = load_image(manifest.resolve(mi.path));
    if (img.width != mi.camera.width || img.height != mi.camera.height)
      throw DataError("image dimensions disagree with the declared camera: " + mi.path);
    ds.images.push_back(std::move(img));
  }
  return ds;
}

RayBatch sample_ray_batch(const TrainDataset& ds, RandomStream& rng, int batch_size) {
  if (ds.n_images() == 0) throw DataError("cannot sample rays from an empty dataset");
  RayBatch b;
  b.rays.reserve(batch_size);
  b.gt.reserve(batch_size);
  b.image_index.reserve(batch_size);
  for (int r = 0; r < batch_size; ++r) {
    const int img = static_cast<int>(rng.below(static_cast<uint64_t>(ds.n_images())));
    const PinholeCamera& cam = ds.manifest.images[img].camera;
    const int64_t pix = static_cast<int64_t>(rng.below(ds.images[img].pixel_count()));
    const int px = static_cast<int>(pix % cam.width);
    const int py = static_cast<int>(pix / cam.width);
    b.rays.push_back(cam.generate_ray(px, py));
    b.gt.push_back(ds.images[img].pixel(px, py));
    b.image_index.push_back(img);
  }
  return b;
}

RayBatch sample_ray_batch_single_image(const TrainDataset& ds, RandomStream& rng, int batch_size,
                                       int image) {
  if (image < 0 || image >= ds.n_images()) throw DataError("batch image index out of range");
  RayBatch b;
  b.rays.reserve(batch_size);
  b.gt.reserve(batch_size);
  b.image_index.assign(static_cast<size_t>(batch_size), image);
  const PinholeCamera& cam = ds.manifest.images[image].camera;
  for (int r = 0; r < batch_size; ++r) {
    const int64_t pix = static_cast<int64_t>(rng.below(ds.images[image].pixel_count()));
    const int px = static_cast<int>(pix % cam.width);
    const int py = static_cast<int>(pix / cam.width);
    b.rays.push_back(cam.generate_ray(px, py));
    b.gt.push_back(ds.images[image].pixel(px, py));
  }
  return b;
}

double loss_nerfcc(const std::vector<Rgb>& local_pixels, const std::vector<Rgb>& global_pixels,
                   const std::vector<Rgb>& gt_pixels) {
  if (gt_pixels.empty()) throw DataError("loss over an empty batch");
  if (local_pixels.size() != gt_pixels.size()) throw DataError("loss batch size mismatch");
  if (!global_pixels.empty() && global_pixels.size() != gt_pixels.size())
    throw DataError("loss batch size mismatch");
  double acc_local = 0.0;
  double acc_global = 0.0;
  for (size_t i = 0; i < gt_pixels.size(); ++i) {
    acc_local += (local_pixels[i] - gt_pixels[i]).matrix().squaredNorm();
    if (!global_pixels.empty())
      acc_global += (global_pixels[i] - gt_pixels[i]).matrix().squaredNorm();
  }
  const double n = static_cast<double>(gt_pixels.size());
  return acc_local / n + (global_pixels.empty() ? 0.0 : acc_global / n);
}

TrainState init_train_state(const TrainConfig& config, const TrainDataset& ds) {
  config.validate();
  if (ds.n_images() == 0) throw DataError("training needs at least one image");
  TrainState state;
  state.config = config;
  state.config.field.seed = config.seed;
  state.config.decoder.seed = config.seed;
  if (config.mode == TrainMode::MlpOnly) {
    MlpField::init_params(state.config.field, state.store);
  } else {
    const FusionParams fp = FusionParams::make(config.feature_width, config.volume_feature_width,
                                               config.fusion_mode, config.seed);
    fp.init_params(state.store);
    VolumeField::init_params(state.config.decoder, config.volume_feature_width, state.store);
    state.global_volume.grid = config.grid;
    state.global_volume.feature_width = config.volume_feature_width;
  }
  for (int i = 0; i < ds.n_images(); ++i) {
    Tensor& t = state.store.add("lighting/" + std::to_string(i), {kShCoeffs, 3});
    const SHLighting init = ds.manifest.images[i].lighting ? *ds.manifest.images[i].lighting
                                                           : SHLighting::dc_white();
    for (int k = 0; k < kShCoeffs; ++k)
      for (int c = 0; c < 3; ++c) t.values[static_cast<size_t>(k) * 3 + c] = init.coeff[k][c];
  }
  state.adam.config.lr = config.lr;
  return state;
}

std::vector<int> view_group(const TrainDataset& ds, int frame, int kappa) {
  const int n = ds.n_images();
  if (frame < 0 || frame >= n) throw DataError("view group frame out of range");
  const Vec3 center = ds.manifest.images[frame].camera.translation;
  std::vector<std::pair<double, int>> order;
  order.reserve(n);
  for (int i = 0; i < n; ++i)
    order.emplace_back((ds.manifest.images[i].camera.translation - center).norm(), i);
  std::sort(order.begin(), order.end());
  std::vector<int> group;
  for (int i = 0; i < n && i < kappa; ++i) group.push_back(order[i].second);
  return group;
}

FrozenBatch freeze_batch(const TrainState& state, const TrainDataset& ds, int64_t step) {
  const TrainConfig& cfg = state.config;
  FrozenBatch f;
  RandomStream batch_rng(substream(cfg.seed, streams::kBatch, static_cast<uint64_t>(step)));
  if (cfg.mode == TrainMode::Fused) {
    f.frame = static_cast<int>(step % ds.n_images());
    f.group = view_group(ds, f.frame, cfg.kappa);
    f.batch = sample_ray_batch_single_image(ds, batch_rng, cfg.batch_rays, f.frame);
  } else {
    f.batch = sample_ray_batch(ds, batch_rng, cfg.batch_rays);
  }
  f.samples.reserve(f.batch.rays.size());
  for (size_t r = 0; r < f.batch.rays.size(); ++r) {
    RandomStream depth_rng(substream(cfg.seed, streams::kDepth, static_cast<uint64_t>(step), r));
    f.samples.push_back(sample_ray(f.batch.rays[r], cfg.n_depth, depth_rng));
  }
  return f;
}

namespace {

struct FlatSamples {
  std::vector<Vec3> points;
  std::vector<double> deltas;
  std::vector<int> offsets;  // one past the last sample of each ray
};

FlatSamples flatten(const std::vector<RaySampleSet>& samples) {
  FlatSamples f;
  f.offsets.push_back(0);
  for (const RaySampleSet& s : samples) {
    f.points.insert(f.points.end(), s.points.begin(), s.points.end());
    f.deltas.insert(f.deltas.end(), s.delta.begin(), s.delta.end());
    f.offsets.push_back(static_cast<int>(f.points.size()));
  }
  return f;
}

std::vector<std::vector<double>> per_ray_weights(const MatX& sigma, const FlatSamples& flat) {
  const int n_rays = static_cast<int>(flat.offsets.size()) - 1;
  std::vector<std::vector<double>> w(n_rays);
  for (int r = 0; r < n_rays; ++r) {
    const int lo = flat.offsets[r];
    const int hi = flat.offsets[r + 1];
    const std::vector<double> sig(sigma.data() + lo, sigma.data() + hi);
    const std::vector<double> del(flat.deltas.begin() + lo, flat.deltas.begin() + hi);
    w[r] = composite_weights(sig, del).w;
  }
  return w;
}

MatX basis_from_normals(const std::vector<Vec3>& normals) {
  MatX b(static_cast<int>(normals.size()), kShCoeffs);
  for (size_t r = 0; r < normals.size(); ++r) {
    const std::array<double, kShCoeffs> row = sh_basis(normals[r]);
    for (int k = 0; k < kShCoeffs; ++k) b(static_cast<int>(r), k) = row[k];
  }
  return b;
}

std::vector<Var> lighting_params(Tape& tape, ParameterStore& store, int n_images) {
  std::vector<Var> lights;
  lights.reserve(n_images);
  for (int i = 0; i < n_images; ++i)
    lights.push_back(tape.param(store, "lighting/" + std::to_string(i)));
  return lights;
}

/// Relit pixel per ray (shade of the composited albedo plus residual
/// background) and its batch-mean squared error against gt, all on the tape.
Var record_relit_loss(Tape& tape, Var sigma, Var albedo, const FlatSamples& flat,
                      const MatX& basis, const std::vector<Var>& lights,
                      const std::vector<int>& which, const Rgb& background, const MatX& gt) {
  const int n_rays = static_cast<int>(flat.offsets.size()) - 1;
  const int n_samples = tape.rows(sigma);
  Var cum_albedo =
      tape.composite_rays(sigma, albedo, flat.deltas, flat.offsets, Eigen::RowVectorXd::Zero(3));
  Var ones = tape.constant(MatX::Ones(n_samples, 1));
  Var opacity =
      tape.composite_rays(sigma, ones, flat.deltas, flat.offsets, Eigen::RowVectorXd::Zero(1));
  Var shaded = tape.shade_rows(cum_albedo, basis, lights, which);
  MatX bg_rows(n_rays, 3);
  for (int r = 0; r < n_rays; ++r) bg_rows.row(r) << background[0], background[1], background[2];
  Var residual = tape.sub(tape.constant(MatX::Ones(n_rays, 1)), opacity);
  Var bg_term = tape.scale_rows_var(tape.constant(bg_rows), residual);
  Var pixel = tape.add(shaded, bg_term);
  Var diff = tape.sub(pixel, tape.constant(gt));
  return tape.scale(tape.sum_all(tape.mul(diff, diff)), 1.0 / n_rays);
}

}  // namespace

StepOutputs eval_batch_loss(TrainState& state, const TrainDataset& ds, const FrozenBatch& frozen,
                            bool with_grad, const MatX* basis_local_override,
                            const MatX* basis_global_override) {
  const TrainConfig& cfg = state.config;
  const int n_rays = static_cast<int>(frozen.batch.rays.size());
  if (n_rays == 0) throw DataError("training batch is empty");
  const FlatSamples flat = flatten(frozen.samples);
  MatX gt(n_rays, 3);
  for (int r = 0; r < n_rays; ++r)
    gt.row(r) << frozen.batch.gt[r][0], frozen.batch.gt[r][1], frozen.batch.gt[r][2];
  const double h = normal_fd_step(frozen.batch.rays[0]);

  Tape tape;
  const std::vector<Var> lights = lighting_params(tape, state.store, ds.n_images());
  StepOutputs out;

  if (cfg.mode == TrainMode::MlpOnly) {
    const MlpField field(cfg.field, &state.store);
    auto [sigma, albedo] = field.eval(tape, state.store, flat.points);
    MatX basis;
    if (basis_local_override) {
      basis = *basis_local_override;
    } else {
      const auto weights = per_ray_weights(tape.value(sigma), flat);
      basis = basis_from_normals(
          aggregate_normals_batch(field, frozen.samples, weights, frozen.batch.rays, h));
    }
    Var loss = record_relit_loss(tape, sigma, albedo, flat, basis, lights,
                                 frozen.batch.image_index, cfg.background, gt);
    out.loss.local = tape.value(loss)(0, 0);
    out.loss.global_term = 0.0;
    out.loss.total = out.loss.local;
    out.basis_local = basis;
    if (with_grad) {
      tape.backward(loss);
      tape.accumulate_param_grads();
    }
    return out;
  }

  // Fused mode. Only the voxels touched by this batch are materialized; the
  // candidate set is every valid stencil corner of every sample point.
  const FusionParams fp = FusionParams::make(cfg.feature_width, cfg.volume_feature_width,
                                             cfg.fusion_mode, cfg.seed);
  const VolumeGrid& grid = cfg.grid;
  const int fv = cfg.volume_feature_width;
  const int n_samples = static_cast<int>(flat.points.size());

  std::vector<TrilinearStencil> stencils(flat.points.size());
  std::vector<int64_t> candidates;
  for (size_t i = 0; i < flat.points.size(); ++i) {
    stencils[i] = trilinear_stencil(grid, flat.points[i]);
    for (int64_t idx : stencils[i].index)
      if (idx >= 0) candidates.push_back(idx);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (candidates.empty()) throw DataError("training rays never enter the feature grid");

  const int n_views = static_cast<int>(frozen.group.size());
  std::vector<const PinholeCamera*> cams;
  cams.reserve(n_views);
  for (int g : frozen.group) cams.push_back(&ds.manifest.images[g].camera);

  std::vector<int64_t> visible;
  std::vector<std::vector<ViewSample>> vs_per_view(n_views);
  for (int64_t idx : candidates) {
    const Vec3 c = grid.center(idx);
    std::vector<ViewSample> vs(n_views);
    int n_vis = 0;
    for (int g = 0; g < n_views; ++g) {
      vs[g] = project_for_sampling(*cams[g], c);
      n_vis += vs[g].valid ? 1 : 0;
    }
    if (n_vis == 0) continue;
    visible.push_back(idx);
    for (int g = 0; g < n_views; ++g) vs_per_view[g].push_back(vs[g]);
  }
  const int n_vox = static_cast<int>(visible.size());
  if (n_vox == 0) throw DataError("no grid voxel is visible in the current view group");
  std::unordered_map<int64_t, int> vox_row;
  vox_row.reserve(visible.size());
  for (int i = 0; i < n_vox; ++i) vox_row[visible[i]] = i;

  // Per-view features sampled at the voxel centers; invisible views
  // contribute zero rows, so plain sums give visible-only statistics.
  std::vector<Var> gathered;
  VecX n_vis_count = VecX::Zero(n_vox);
  for (int g = 0; g < n_views; ++g) {
    Var feat = encode_view(tape, state.store, fp, ds.images[frozen.group[g]]);
    Eigen::MatrixXi idx(n_vox, 4);
    MatX w = MatX::Zero(n_vox, 4);
    for (int i = 0; i < n_vox; ++i) {
      const ViewSample& vs = vs_per_view[g][i];
      if (vs.valid) {
        for (int k = 0; k < 4; ++k) {
          idx(i, k) = vs.row[k];
          w(i, k) = vs.weight[k];
        }
        n_vis_count[i] += 1.0;
      } else {
        idx.row(i).setConstant(-1);
      }
    }
    gathered.push_back(tape.weighted_gather(feat, std::move(idx), std::move(w)));
  }

  Var sum = gathered[0];
  Var sumsq = tape.mul(gathered[0], gathered[0]);
  for (int g = 1; g < n_views; ++g) {
    sum = tape.add(sum, gathered[g]);
    sumsq = tape.add(sumsq, tape.mul(gathered[g], gathered[g]));
  }
  VecX inv_n(n_vox);
  for (int i = 0; i < n_vox; ++i) inv_n[i] = 1.0 / n_vis_count[i];
  Var mean = tape.scale_rows(sum, inv_n);
  Var variance = tape.sub(tape.scale_rows(sumsq, inv_n), tape.mul(mean, mean));
  Var v_t = fp.aggregator.forward(tape, state.store, tape.concat_cols({mean, variance}));

  // Recurrent state enters as a constant (truncated backpropagation, one
  // step); brand-new voxels copy the local feature unchanged.
  MatX prev = MatX::Zero(n_vox, fv);
  VecX counts = VecX::Zero(n_vox);
  VecX old_mask = VecX::Zero(n_vox);
  MatX new_rows = MatX::Zero(n_vox, fv);
  for (int i = 0; i < n_vox; ++i) {
    const FeatureVolume::Voxel* vox = state.global_volume.find(visible[i]);
    if (vox) {
      for (int c = 0; c < fv; ++c) prev(i, c) = vox->feature[c];
      counts[i] = static_cast<double>(vox->count);
      old_mask[i] = 1.0;
    } else {
      new_rows.row(i).setOnes();
    }
  }
  Var prev_var = tape.constant(prev);
  Var fused;
  if (cfg.fusion_mode == FusionParams::Mode::Gated) {
    Var gate = fp.gate.forward(tape, state.store, tape.concat_cols({prev_var, v_t}));
    Var gate_eff = tape.add(tape.scale_rows(gate, old_mask), tape.constant(new_rows));
    Var keep = tape.sub(tape.constant(MatX::Ones(n_vox, fv)), gate_eff);
    fused = tape.add(tape.mul(gate_eff, v_t), tape.mul(keep, prev_var));
  } else {
    VecX inv_np1(n_vox);
    for (int i = 0; i < n_vox; ++i) inv_np1[i] = 1.0 / (counts[i] + 1.0);
    // Incremental running mean, matching fuse_global's arithmetic exactly.
    fused = tape.add(prev_var, tape.scale_rows(tape.sub(v_t, prev_var), inv_np1));
  }

  // Decode stencils. Local reads the freshly aggregated features; global
  // splits each corner between this step's fused update and voxels that only
  // exist in the recurrent volume.
  Eigen::MatrixXi dec_idx(n_samples, 8);
  MatX dec_w = MatX::Zero(n_samples, 8);
  Eigen::MatrixXi gdec_idx(n_samples, 8);
  MatX gdec_w = MatX::Zero(n_samples, 8);
  Eigen::MatrixXi udec_idx(n_samples, 8);
  MatX udec_w = MatX::Zero(n_samples, 8);
  std::unordered_map<int64_t, int> untouched_row;
  std::vector<int64_t> untouched;
  for (int i = 0; i < n_samples; ++i) {
    for (int k = 0; k < 8; ++k) {
      dec_idx(i, k) = -1;
      gdec_idx(i, k) = -1;
      udec_idx(i, k) = -1;
      const int64_t idx = stencils[i].index[k];
      if (idx < 0) continue;
      auto it = vox_row.find(idx);
      if (it != vox_row.end()) {
        dec_idx(i, k) = it->second;
        dec_w(i, k) = stencils[i].weight[k];
        gdec_idx(i, k) = it->second;
        gdec_w(i, k) = stencils[i].weight[k];
        continue;
      }
      const FeatureVolume::Voxel* vox = state.global_volume.find(idx);
      if (!vox) continue;
      auto [uit, inserted] = untouched_row.try_emplace(idx, static_cast<int>(untouched.size()));
      if (inserted) untouched.push_back(idx);
      udec_idx(i, k) = uit->second;
      udec_w(i, k) = stencils[i].weight[k];
    }
  }

  VecX inside_mask(n_samples);
  for (int i = 0; i < n_samples; ++i) inside_mask[i] = grid.inside(flat.points[i]) ? 1.0 : 0.0;

  const VolumeField vfield(cfg.decoder, fv, &state.store, nullptr);
  Var local_feat = tape.weighted_gather(v_t, dec_idx, dec_w);
  Var global_feat = tape.weighted_gather(fused, gdec_idx, gdec_w);
  if (!untouched.empty()) {
    MatX utab(static_cast<int>(untouched.size()), fv);
    for (size_t u = 0; u < untouched.size(); ++u) {
      const FeatureVolume::Voxel* vox = state.global_volume.find(untouched[u]);
      for (int c = 0; c < fv; ++c) utab(static_cast<int>(u), c) = vox->feature[c];
    }
    global_feat = tape.add(global_feat, tape.weighted_gather(tape.constant(utab), udec_idx, udec_w));
  }
  auto [sig_l_raw, alb_l] = vfield.eval_features(tape, state.store, local_feat);
  auto [sig_g_raw, alb_g] = vfield.eval_features(tape, state.store, global_feat);
  // Outside the grid the field is empty space regardless of decode output.
  Var sig_l = tape.scale_rows(sig_l_raw, inside_mask);
  Var sig_g = tape.scale_rows(sig_g_raw, inside_mask);

  const MatX vt_vals = tape.value(v_t);
  const MatX fused_vals = tape.value(fused);

  MatX basis_l, basis_g;
  if (basis_local_override) basis_l = *basis_local_override;
  if (basis_global_override) basis_g = *basis_global_override;
  if (!basis_local_override) {
    FeatureVolume local_vol;
    local_vol.grid = grid;
    local_vol.feature_width = fv;
    for (int i = 0; i < n_vox; ++i) {
      FeatureVolume::Voxel vox;
      vox.count = 1;
      vox.feature.assign(vt_vals.row(i).data(), vt_vals.row(i).data() + fv);
      local_vol.voxels.emplace(visible[i], std::move(vox));
    }
    const VolumeField lf(cfg.decoder, fv, &state.store, &local_vol);
    const auto w_l = per_ray_weights(tape.value(sig_l), flat);
    basis_l = basis_from_normals(
        aggregate_normals_batch(lf, frozen.samples, w_l, frozen.batch.rays, h));
  }
  if (!basis_global_override) {
    FeatureVolume global_post = state.global_volume;
    global_post.grid = grid;
    global_post.feature_width = fv;
    for (int i = 0; i < n_vox; ++i) {
      FeatureVolume::Voxel& vox = global_post.voxels[visible[i]];
      vox.count = vox.feature.empty() ? 1 : vox.count + 1;
      vox.feature.assign(fused_vals.row(i).data(), fused_vals.row(i).data() + fv);
    }
    const VolumeField gf(cfg.decoder, fv, &state.store, &global_post);
    const auto w_g = per_ray_weights(tape.value(sig_g), flat);
    basis_g = basis_from_normals(
        aggregate_normals_batch(gf, frozen.samples, w_g, frozen.batch.rays, h));
  }

  const std::vector<int> which(static_cast<size_t>(n_rays), frozen.frame);
  Var loss_l =
      record_relit_loss(tape, sig_l, alb_l, flat, basis_l, lights, which, cfg.background, gt);
  Var loss_g =
      record_relit_loss(tape, sig_g, alb_g, flat, basis_g, lights, which, cfg.background, gt);
  Var loss = tape.add(loss_l, loss_g);

  out.loss.local = tape.value(loss_l)(0, 0);
  out.loss.global_term = tape.value(loss_g)(0, 0);
  out.loss.total = tape.value(loss)(0, 0);
  out.basis_local = basis_l;
  out.basis_global = basis_g;
  out.voxel_indices = visible;
  out.fused_features = fused_vals;
  if (with_grad) {
    tape.backward(loss);
    tape.accumulate_param_grads();
  }
  return out;
}

StepLoss train_step(TrainState& state, const TrainDataset& ds) {
  const int64_t step = state.step;
  try {
    if (state.config.mode == TrainMode::Fused && step % ds.n_images() == 0)
      state.global_volume.voxels.clear();
    const FrozenBatch frozen = freeze_batch(state, ds, step);
    state.store.zero_grad();
    StepOutputs out = eval_batch_loss(state, ds, frozen, /*with_grad=*/true);
    adam_step(state.adam, state.store);
    if (state.config.mode == TrainMode::Fused) {
      const int fv = static_cast<int>(out.fused_features.cols());
      for (size_t i = 0; i < out.voxel_indices.size(); ++i) {
        FeatureVolume::Voxel& vox = state.global_volume.voxels[out.voxel_indices[i]];
        vox.count = vox.feature.empty() ? 1 : vox.count + 1;
        vox.feature.assign(out.fused_features.row(static_cast<int>(i)).data(),
                           out.fused_features.row(static_cast<int>(i)).data() + fv);
      }
    }
    state.step += 1;
    return out.loss;
  } catch (const NumericError& e) {
    throw NumericError("step " + std::to_string(step) + ": " + e.what());
  }
}

TrainState train(const TrainDataset& ds, const TrainConfig& config, const std::string& out_dir) {
  namespace fs = std::filesystem;
  config.validate();
  fs::create_directories(out_dir);
  TrainState state = init_train_state(config, ds);
  const auto t0 = std::chrono::steady_clock::now();
  for (int s = 0; s < config.steps; ++s) {
    const StepLoss l = train_step(state, ds);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    state.history.push_back({s, l.local, l.global_term, wall});
    if (config.checkpoint_interval > 0 && (s + 1) % config.checkpoint_interval == 0 &&
        s + 1 < config.steps) {
      save_checkpoint(make_checkpoint(state, ds.n_images()),
                      (fs::path(out_dir) / ("checkpoint_" + std::to_string(s + 1) + ".nfcc"))
                          .string());
    }
  }
  write_loss_csv(state.history, (fs::path(out_dir) / "loss.csv").string());
  if (config.mode == TrainMode::Fused) {
    // Inference-style volume: a fresh dense fusion pass over every frame's
    // view group with the final parameters.
    const FusionParams fp = FusionParams::make(config.feature_width, config.volume_feature_width,
                                               config.fusion_mode, config.seed);
    FeatureVolume global;
    global.grid = config.grid;
    global.feature_width = config.volume_feature_width;
    for (int t = 0; t < ds.n_images(); ++t) {
      std::vector<ImageBuffer> imgs;
      std::vector<PinholeCamera> cams;
      for (int g : view_group(ds, t, config.kappa)) {
        imgs.push_back(ds.images[g]);
        cams.push_back(ds.manifest.images[g].camera);
      }
      const FeatureVolume local = build_local_volume(imgs, cams, state.store, fp, config.grid);
      global = fuse_global(global, local, state.store, fp);
    }
    state.global_volume = std::move(global);
    save_volume(state.global_volume, (fs::path(out_dir) / "global_volume.nfccvol").string());
  }
  save_checkpoint(make_checkpoint(state, ds.n_images()),
                  (fs::path(out_dir) / "checkpoint.nfcc").string());
  return state;
}

void write_loss_csv(const std::vector<LossRow>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write loss trace: " + path);
  out << "step,loss_local,loss_global,wall_seconds\n";
  char buf[192];
  for (const LossRow& row : history) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.6f\n", static_cast<long long>(row.step),
                  row.local, row.global_term, row.wall_seconds);
    out << buf;
  }
  if (!out) throw DataError("write failure on loss trace: " + path);
}

}  // namespace nerfcc
