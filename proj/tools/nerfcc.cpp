// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/commands.hpp"
#include "nerfcc/report.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace {

using nerfcc::CorrectCommandOptions;
using nerfcc::EvaluateCommandOptions;
using nerfcc::RelightCommandOptions;
using nerfcc::SynthCommandOptions;
using nerfcc::TrainCommandOptions;

void add_synth(CLI::App& app, SynthCommandOptions& opt) {
  CLI::App* cmd = app.add_subcommand("synth", "Render a synthetic posed dataset with masks");
  cmd->add_option("--scene", opt.scene_path, "Scene description JSON")->required();
  cmd->add_option("--out", opt.out_dir, "Output directory")->required();
  cmd->add_option("--views", opt.config.n_views, "Number of ring cameras");
  cmd->add_option("--width", opt.config.width, "Image width");
  cmd->add_option("--height", opt.config.height, "Image height");
  cmd->add_option("--seed", opt.config.seed, "Random seed");
  cmd->add_option("--radius", opt.config.radius, "Camera ring radius");
  cmd->add_option("--elevation", opt.config.elevation_deg, "Ring elevation (degrees)");
  cmd->add_option("--fov", opt.config.fov_deg, "Vertical field of view (degrees)");
  cmd->add_option("--near", opt.config.near, "Near plane");
  cmd->add_option("--far", opt.config.far, "Far plane");
  cmd->add_option("--lightings", opt.config.n_lightings, "1 shared or 2 split lightings");
  cmd->add_option("--oracle-steps", opt.config.oracle_steps, "Reference render step count");
  cmd->add_flag("--no-perturb", [&opt](int64_t) { opt.config.perturb = false; },
                "Skip per-image color perturbation");
  cmd->add_option("--threads", opt.threads, "Worker thread cap");
  cmd->callback([&opt] { nerfcc::cmd_synth(opt); });
}

void add_train(CLI::App& app, TrainCommandOptions& opt, std::string& mode, std::string& fusion,
               std::vector<double>& background, double& grid_extent) {
  CLI::App* cmd = app.add_subcommand("train", "Train a model on a posed dataset");
  cmd->add_option("--manifest", opt.manifest_path, "Dataset manifest JSON")->required();
  cmd->add_option("--out", opt.out_dir, "Output directory")->required();
  cmd->add_option("--mode", mode, "mlp or fused")
      ->check(CLI::IsMember({"mlp", "fused"}));
  cmd->add_option("--steps", opt.config.steps, "Optimization steps");
  cmd->add_option("--batch-rays", opt.config.batch_rays, "Rays per step");
  cmd->add_option("--depth-samples", opt.config.n_depth, "Depth samples per ray");
  cmd->add_option("--lr", opt.config.lr, "Adam learning rate");
  cmd->add_option("--seed", opt.config.seed, "Random seed");
  cmd->add_option("--checkpoint-interval", opt.config.checkpoint_interval,
                  "Steps between checkpoints (0 = final only)");
  cmd->add_option("--n-freq", opt.config.field.n_freq, "Positional encoding frequencies");
  cmd->add_option("--grid-resolution", opt.config.grid.resolution, "Feature grid resolution");
  cmd->add_option("--grid-extent", grid_extent, "Grid half extent about the origin");
  cmd->add_option("--feature-width", opt.config.feature_width, "Per-view feature channels");
  cmd->add_option("--volume-feature-width", opt.config.volume_feature_width,
                  "Voxel feature channels");
  cmd->add_option("--kappa", opt.config.kappa, "Views per fusion group");
  cmd->add_option("--fusion", fusion, "gated or count-average")
      ->check(CLI::IsMember({"gated", "count-average"}));
  cmd->add_option("--background", background, "Background color r g b")->expected(3);
  cmd->add_option("--threads", opt.threads, "Worker thread cap");
  cmd->callback([&opt, &mode, &fusion, &background, &grid_extent] {
    opt.config.mode = mode == "fused" ? nerfcc::TrainMode::Fused : nerfcc::TrainMode::MlpOnly;
    opt.config.fusion_mode = fusion == "count-average"
                                 ? nerfcc::FusionParams::Mode::CountAverage
                                 : nerfcc::FusionParams::Mode::Gated;
    opt.config.background = nerfcc::Rgb(background[0], background[1], background[2]);
    opt.config.grid.bound_min = nerfcc::Vec3::Constant(-grid_extent);
    opt.config.grid.bound_max = nerfcc::Vec3::Constant(grid_extent);
    nerfcc::cmd_train(opt);
  });
}

void add_relight(CLI::App& app, RelightCommandOptions& opt) {
  CLI::App* cmd = app.add_subcommand("relight", "Render one view under a chosen lighting");
  cmd->add_option("--checkpoint", opt.checkpoint_path, "Trained checkpoint")->required();
  cmd->add_option("--manifest", opt.manifest_path, "Dataset manifest JSON")->required();
  cmd->add_option("--view", opt.view, "Camera index within the manifest")->required();
  cmd->add_option("--reference-l", opt.l_source, "mean, image:<k>, or file:<path>");
  cmd->add_option("--out", opt.out_path, "Output PNG path")->required();
  cmd->add_option("--volume", opt.volume_path, "Feature volume (fused mode)");
  cmd->add_option("--seed", opt.seed, "Render seed");
  cmd->add_option("--depth-samples", opt.n_depth, "Depth samples per ray (0 = training value)");
  cmd->add_option("--threads", opt.threads, "Worker thread cap");
  cmd->callback([&opt] { nerfcc::cmd_relight(opt); });
}

void add_correct(CLI::App& app, CorrectCommandOptions& opt) {
  CLI::App* cmd =
      app.add_subcommand("correct", "Re-render every view under one reference lighting");
  cmd->add_option("--checkpoint", opt.checkpoint_path, "Trained checkpoint")->required();
  cmd->add_option("--manifest", opt.manifest_path, "Dataset manifest JSON")->required();
  cmd->add_option("--out", opt.out_dir, "Output directory")->required();
  cmd->add_option("--reference-l", opt.reference_l, "mean, image:<k>, or file:<path>");
  cmd->add_option("--volume", opt.volume_path, "Feature volume (fused mode)");
  cmd->add_option("--seed", opt.seed, "Render seed");
  cmd->add_option("--depth-samples", opt.n_depth, "Depth samples per ray (0 = training value)");
  cmd->add_option("--threads", opt.threads, "Worker thread cap");
  cmd->callback([&opt] { nerfcc::cmd_correct(opt); });
}

void add_evaluate(CLI::App& app, EvaluateCommandOptions& opt) {
  CLI::App* cmd = app.add_subcommand("evaluate", "Score corrected images against the inputs");
  cmd->add_option("--manifest", opt.manifest_path, "Dataset manifest JSON")->required();
  cmd->add_option("--corrected", opt.corrected_dir, "Directory of corrected_XXX.png")->required();
  cmd->add_option("--out", opt.out_dir, "Report output directory")->required();
  cmd->add_option("--nb-bins", opt.n_bins, "Histogram bin count");
  cmd->add_option("--threads", opt.threads, "Worker thread cap");
  cmd->callback([&opt] {
    const std::vector<nerfcc::MetricReport> rows = nerfcc::cmd_evaluate(opt);
    std::fputs(nerfcc::format_report_text(rows).c_str(), stdout);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NeRF-based color consistency pipeline"};
  app.require_subcommand(1);

  SynthCommandOptions synth_opt;
  TrainCommandOptions train_opt;
  RelightCommandOptions relight_opt;
  CorrectCommandOptions correct_opt;
  EvaluateCommandOptions evaluate_opt;
  std::string train_mode = "mlp";
  std::string train_fusion = "gated";
  std::vector<double> train_background = {0.0, 0.0, 0.0};
  double train_grid_extent = 1.0;

  add_synth(app, synth_opt);
  add_train(app, train_opt, train_mode, train_fusion, train_background, train_grid_extent);
  add_relight(app, relight_opt);
  add_correct(app, correct_opt);
  add_evaluate(app, evaluate_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const nerfcc::UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const nerfcc::DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const nerfcc::NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
