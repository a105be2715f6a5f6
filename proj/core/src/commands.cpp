// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/commands.hpp"

#include "nerfcc/renderer.hpp"
#include "nerfcc/report.hpp"
#include "nerfcc/threading.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace nerfcc {

namespace fs = std::filesystem;

namespace {

void apply_threads(int threads) {
  if (threads > 0) set_max_threads(threads);
}

std::string corrected_name(int i) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "corrected_%03d.png", i);
  return buf;
}

}  // namespace

SynthResult cmd_synth(const SynthCommandOptions& opt) {
  apply_threads(opt.threads);
  if (opt.scene_path.empty()) throw UsageError("synth needs a scene file");
  if (opt.out_dir.empty()) throw UsageError("synth needs an output directory");
  const SceneSpec scene = load_scene(opt.scene_path);
  return synthesize_dataset(scene, opt.config, opt.out_dir);
}

void cmd_train(const TrainCommandOptions& opt) {
  apply_threads(opt.threads);
  if (opt.manifest_path.empty()) throw UsageError("train needs a manifest");
  if (opt.out_dir.empty()) throw UsageError("train needs an output directory");
  const DatasetManifest manifest = load_manifest(opt.manifest_path);
  const TrainDataset ds = load_dataset(manifest);
  train(ds, opt.config, opt.out_dir);
}

std::unique_ptr<LoadedModel> load_model(const std::string& checkpoint_path,
                                        const std::string& volume_path) {
  auto model = std::make_unique<LoadedModel>();
  model->ckpt = load_checkpoint(checkpoint_path);
  if (model->ckpt.config.mode == TrainMode::MlpOnly) {
    model->field = std::make_unique<MlpField>(model->ckpt.config.field, &model->ckpt.store);
    return model;
  }
  const std::string vpath =
      volume_path.empty()
          ? (fs::path(checkpoint_path).parent_path() / "global_volume.nfccvol").string()
          : volume_path;
  model->volume = load_volume(vpath);
  const TrainConfig& cfg = model->ckpt.config;
  if (model->volume.feature_width != cfg.volume_feature_width)
    throw DataError("volume feature width disagrees with the checkpoint: " + vpath);
  if (model->volume.grid.resolution != cfg.grid.resolution)
    throw DataError("volume grid resolution disagrees with the checkpoint: " + vpath);
  model->field = std::make_unique<VolumeField>(cfg.decoder, cfg.volume_feature_width,
                                               &model->ckpt.store, &model->volume);
  return model;
}

SHLighting resolve_lighting(const std::string& source, const ParameterStore& store,
                            int n_images) {
  if (source == "mean") return mean_lighting(store, n_images);
  if (source.rfind("image:", 0) == 0) {
    int k = -1;
    try {
      k = std::stoi(source.substr(6));
    } catch (const std::exception&) {
      throw UsageError("bad lighting source: " + source);
    }
    if (k < 0 || k >= n_images) throw UsageError("lighting image index out of range: " + source);
    return lighting_from_store(store, k);
  }
  if (source.rfind("file:", 0) == 0) {
    const std::string path = source.substr(5);
    std::ifstream in(path);
    if (!in) throw DataError("cannot open lighting file: " + path);
    std::vector<double> values(27);
    for (double& v : values)
      if (!(in >> v)) throw DataError("lighting file needs 27 numbers: " + path);
    return lighting_from_flat(values);
  }
  throw UsageError("lighting source must be mean, image:<k>, or file:<path>");
}

namespace {

RenderOptions render_options_for(const Checkpoint& ckpt, uint64_t seed, int n_depth) {
  RenderOptions opts;
  opts.mode = RenderOptions::Mode::Relit;
  opts.n_depth = n_depth > 0 ? n_depth : ckpt.config.n_depth;
  opts.seed = seed;
  opts.background = ckpt.config.background;
  opts.validate();
  return opts;
}

}  // namespace

void cmd_relight(const RelightCommandOptions& opt) {
  apply_threads(opt.threads);
  if (opt.out_path.empty()) throw UsageError("relight needs an output path");
  const std::unique_ptr<LoadedModel> model = load_model(opt.checkpoint_path, opt.volume_path);
  const DatasetManifest manifest = load_manifest(opt.manifest_path);
  if (opt.view < 0 || opt.view >= static_cast<int>(manifest.images.size()))
    throw UsageError("relight view index out of range");
  const SHLighting lighting =
      resolve_lighting(opt.l_source, model->ckpt.store, model->ckpt.n_images);
  const RenderOptions opts = render_options_for(model->ckpt, opt.seed, opt.n_depth);
  const ImageBuffer img =
      render_image(*model->field, lighting, manifest.images[opt.view].camera, opts);
  if (!fs::path(opt.out_path).parent_path().empty())
    fs::create_directories(fs::path(opt.out_path).parent_path());
  save_image(img, opt.out_path);
}

void cmd_correct(const CorrectCommandOptions& opt) {
  apply_threads(opt.threads);
  if (opt.out_dir.empty()) throw UsageError("correct needs an output directory");
  const std::unique_ptr<LoadedModel> model = load_model(opt.checkpoint_path, opt.volume_path);
  const DatasetManifest manifest = load_manifest(opt.manifest_path);
  const int n = static_cast<int>(manifest.images.size());
  if (n == 0) throw DataError("manifest has no images");
  if (model->ckpt.n_images != n)
    throw DataError("checkpoint was trained on a different number of images");
  const SHLighting reference =
      resolve_lighting(opt.reference_l, model->ckpt.store, model->ckpt.n_images);
  const RenderOptions opts = render_options_for(model->ckpt, opt.seed, opt.n_depth);
  fs::create_directories(opt.out_dir);

  std::vector<ImageBuffer> corrected;
  std::vector<ImageBuffer> opacities;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < n; ++i) {
    ImageBuffer opacity;
    ImageBuffer img =
        render_image(*model->field, reference, manifest.images[i].camera, opts, &opacity);
    save_image(img, (fs::path(opt.out_dir) / corrected_name(i)).string());
    corrected.push_back(std::move(img));
    opacities.push_back(std::move(opacity));
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  {
    std::ofstream out((fs::path(opt.out_dir) / "correct_time.txt").string());
    if (!out) throw DataError("cannot write correction timing file");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f\n", wall);
    out << buf;
  }

  // Inspection composite: later views overwrite wherever they see surface.
  ImageBuffer composite = corrected[0];
  for (int i = 1; i < n; ++i) {
    if (!composite.same_dims(corrected[i])) continue;
    for (int y = 0; y < composite.height; ++y)
      for (int x = 0; x < composite.width; ++x)
        if (opacities[i].at(x, y, 0) > 0.5) composite.set_pixel(x, y, corrected[i].pixel(x, y));
  }
  save_image(composite, (fs::path(opt.out_dir) / "composite.png").string());
}

std::vector<MetricReport> cmd_evaluate(const EvaluateCommandOptions& opt) {
  apply_threads(opt.threads);
  if (opt.out_dir.empty()) throw UsageError("evaluate needs an output directory");
  if (opt.n_bins < 2) throw UsageError("histogram bin count must be >= 2");
  const DatasetManifest manifest = load_manifest(opt.manifest_path);
  const TrainDataset ds = load_dataset(manifest);
  const int n = ds.n_images();
  if (manifest.overlaps.empty()) throw DataError("manifest lists no overlap pairs");

  std::vector<OverlapMask> overlaps;
  overlaps.reserve(manifest.overlaps.size());
  for (const OverlapPair& p : manifest.overlaps)
    overlaps.push_back({p.i, p.j, load_mask(manifest.resolve(p.mask_path))});

  std::vector<ImageBuffer> corrected;
  corrected.reserve(n);
  for (int i = 0; i < n; ++i) {
    const std::string path = (fs::path(opt.corrected_dir) / corrected_name(i)).string();
    corrected.push_back(load_image(path));
    if (!corrected.back().same_dims(ds.images[i]))
      throw DataError("corrected image dimensions differ from the input: " + path);
  }

  std::vector<MetricReport> rows(3);
  rows[0].method = "uncorrected";
  rows[0].cd = compute_cd(ds.images, overlaps, opt.n_bins, &rows[0].pairs);
  rows[0].gl = compute_gl(ds.images, ds.images);
  rows[0].wall_seconds = 0.0;

  rows[1].method = "gain-bias";
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<ImageBuffer> baseline = baseline_gain_bias(ds.images, overlaps);
  rows[1].wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rows[1].cd = compute_cd(baseline, overlaps, opt.n_bins, &rows[1].pairs);
  rows[1].gl = compute_gl(ds.images, baseline);

  rows[2].method = "nerfcc";
  rows[2].cd = compute_cd(corrected, overlaps, opt.n_bins, &rows[2].pairs);
  rows[2].gl = compute_gl(ds.images, corrected);
  rows[2].wall_seconds = 0.0;
  {
    std::ifstream in((fs::path(opt.corrected_dir) / "correct_time.txt").string());
    double t = 0.0;
    if (in >> t) rows[2].wall_seconds = t;
  }

  fs::create_directories(opt.out_dir);
  write_report_text(rows, (fs::path(opt.out_dir) / "report.txt").string());
  write_report_csv(rows, (fs::path(opt.out_dir) / "report.csv").string());
  write_pairs_csv(rows, (fs::path(opt.out_dir) / "pairs.csv").string());
  return rows;
}

}  // namespace nerfcc
