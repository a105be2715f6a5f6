// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/checkpoint.hpp"
#include "nerfcc/metrics.hpp"
#include "nerfcc/synth.hpp"

#include <memory>
#include <string>
#include <vector>

namespace nerfcc {

/// The command layer used by both the CLI binary and the acceptance tests:
/// every subcommand is an ordinary function over an options struct. Errors
/// surface as UsageError/DataError/NumericError; the binary maps them to
/// exit codes 1/2/3.

struct SynthCommandOptions {
  std::string scene_path;
  std::string out_dir;
  SynthConfig config;
  int threads = 0;
};
SynthResult cmd_synth(const SynthCommandOptions& opt);

struct TrainCommandOptions {
  std::string manifest_path;
  std::string out_dir;
  TrainConfig config;
  int threads = 0;
};
void cmd_train(const TrainCommandOptions& opt);

/// A trained model rehydrated for rendering. The field points into `ckpt`
/// and `volume`, so the struct is heap-pinned and immovable.
struct LoadedModel {
  Checkpoint ckpt;
  FeatureVolume volume;  // fused mode only
  std::unique_ptr<RadianceField> field;

  LoadedModel() = default;
  LoadedModel(const LoadedModel&) = delete;
  LoadedModel& operator=(const LoadedModel&) = delete;
};

/// volume_path may be empty: fused checkpoints then look for
/// "global_volume.nfccvol" next to the checkpoint file.
std::unique_ptr<LoadedModel> load_model(const std::string& checkpoint_path,
                                        const std::string& volume_path = {});

/// "mean" | "image:<k>" | "file:<path>" (27 whitespace-separated numbers,
/// coefficient-major, channels inner).
SHLighting resolve_lighting(const std::string& source, const ParameterStore& store, int n_images);

struct RelightCommandOptions {
  std::string checkpoint_path;
  std::string manifest_path;
  int view = 0;  // camera index within the manifest
  std::string l_source = "mean";
  std::string out_path;
  std::string volume_path;
  uint64_t seed = 0;
  int n_depth = 0;  // 0 = the checkpoint's training depth count
  int threads = 0;
};
void cmd_relight(const RelightCommandOptions& opt);

struct CorrectCommandOptions {
  std::string checkpoint_path;
  std::string manifest_path;
  std::string out_dir;
  std::string reference_l = "mean";
  std::string volume_path;
  uint64_t seed = 0;
  int n_depth = 0;
  int threads = 0;
};
/// Re-renders every manifest view under one shared reference lighting;
/// writes corrected_XXX.png, a last-writer-wins composite.png, and
/// correct_time.txt (render wall seconds) into out_dir.
void cmd_correct(const CorrectCommandOptions& opt);

struct EvaluateCommandOptions {
  std::string manifest_path;
  std::string corrected_dir;
  std::string out_dir;
  int n_bins = 256;
  int threads = 0;
};
/// Rows: uncorrected inputs, the internal gain/bias baseline, and the
/// corrected set from corrected_dir. Writes report.txt, report.csv,
/// pairs.csv into out_dir and returns the rows.
std::vector<MetricReport> cmd_evaluate(const EvaluateCommandOptions& opt);

}  // namespace nerfcc
