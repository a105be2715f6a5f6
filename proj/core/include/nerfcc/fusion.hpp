// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/camera.hpp"
#include "nerfcc/image.hpp"
#include "nerfcc/mlp.hpp"

#include <array>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace nerfcc {

/// Axis-aligned voxel lattice. Cell (i,j,k) has its center at
/// bound_min + (i+0.5, j+0.5, k+0.5) * cell_size.
struct VolumeGrid {
  Vec3 bound_min = Vec3::Constant(-1.0);
  Vec3 bound_max = Vec3::Constant(1.0);
  int resolution = 64;

  void validate() const;
  Vec3 cell_size() const { return (bound_max - bound_min) / resolution; }
  int64_t linear_index(int ix, int iy, int iz) const {
    return (static_cast<int64_t>(iz) * resolution + iy) * resolution + ix;
  }
  Vec3 center(int ix, int iy, int iz) const {
    const Vec3 cs = cell_size();
    return bound_min + Vec3((ix + 0.5) * cs[0], (iy + 0.5) * cs[1], (iz + 0.5) * cs[2]);
  }
  Vec3 center(int64_t linear) const {
    const int ix = static_cast<int>(linear % resolution);
    const int iy = static_cast<int>((linear / resolution) % resolution);
    const int iz = static_cast<int>(linear / (static_cast<int64_t>(resolution) * resolution));
    return center(ix, iy, iz);
  }
  bool inside(const Vec3& p) const {
    return (p.array() >= bound_min.array()).all() && (p.array() <= bound_max.array()).all();
  }
};

/// Sparse voxel grid of learned features with per-voxel visitation counts.
struct FeatureVolume {
  struct Voxel {
    std::vector<double> feature;
    int count = 0;
  };

  VolumeGrid grid;
  int feature_width = 16;
  std::unordered_map<int64_t, Voxel> voxels;

  const Voxel* find(int64_t index) const {
    auto it = voxels.find(index);
    return it == voxels.end() ? nullptr : &it->second;
  }
};

/// Trilinear interpolation stencil over voxel centers. Corners that fall
/// outside the lattice carry index -1 (they contribute a zero feature).
struct TrilinearStencil {
  std::array<int64_t, 8> index;
  std::array<double, 8> weight;
};
TrilinearStencil trilinear_stencil(const VolumeGrid& grid, const Vec3& p);

/// Bilinear stencil of a voxel center projected into a view: 4 feature-map
/// rows (y*W+x, corner indices clamped to the image) and weights. Invalid
/// when the point is behind the camera or projects outside the image.
struct ViewSample {
  std::array<int, 4> row;
  std::array<double, 4> weight;
  bool valid = false;
};
ViewSample project_for_sampling(const PinholeCamera& camera, const Vec3& p);

/// Aggregation + gated-fusion networks of the multi-view fusion stage.
struct FusionParams {
  enum class Mode { Gated, CountAverage };
  int feature_width = 8;          // F, per-view features
  int volume_feature_width = 16;  // F_v, voxel features
  Mode mode = Mode::Gated;
  Mlp encoder1, encoder2;  // realized as conv kernels, see encode_view
  Mlp aggregator;          // [mean, var] (2F) -> F_v
  Mlp gate;                // [v_g, v_t] (2F_v) -> F_v gate in (0,1)

  static FusionParams make(int feature_width, int volume_feature_width, Mode mode,
                           uint64_t seed);
  void init_params(ParameterStore& store) const;
};

/// Two stacked 3x3 windowed linear filters with a softplus between them,
/// RGB -> F channels, replicate padding. Returns (H*W) x F rows.
MatX encode_view_plain(const ParameterStore& store, const FusionParams& fp,
                       const ImageBuffer& image);
Var encode_view(Tape& tape, ParameterStore& store, const FusionParams& fp,
                const ImageBuffer& image);

/// Bilinear feature-map sample of a voxel center in one view, or nullopt if
/// invisible there.
std::optional<VecX> sample_voxel_feature(const MatX& feature_map, const PinholeCamera& camera,
                                         const Vec3& voxel_center);

/// Population mean and variance over visible-view features, concatenated and
/// passed through the aggregation network.
VecX aggregate_mean_var(const std::vector<VecX>& features, const ParameterStore& store,
                        const FusionParams& fp);

/// Dense local volume over every voxel visible in at least one view.
FeatureVolume build_local_volume(const std::vector<ImageBuffer>& images,
                                 const std::vector<PinholeCamera>& cameras,
                                 const ParameterStore& store, const FusionParams& fp,
                                 const VolumeGrid& grid);

/// Recurrent global update. Gated: v' = g ⊙ v_t + (1-g) ⊙ v_g with
/// g = gate([v_g, v_t]); new voxels are copied. Count-average:
/// v' = (n v_g + v_t)/(n+1). Voxels absent from local are unchanged.
FeatureVolume fuse_global(const FeatureVolume& global, const FeatureVolume& local,
                          const ParameterStore& store, const FusionParams& fp);

/// Binary snapshot (magic NFCCVOL1), records sorted by voxel index.
void save_volume(const FeatureVolume& volume, const std::string& path);
FeatureVolume load_volume(const std::string& path);

}  // namespace nerfcc
