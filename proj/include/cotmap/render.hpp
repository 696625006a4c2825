#pragma once

#include "cotmap/cotlabel.hpp"
#include "cotmap/image.hpp"
#include "cotmap/parallel.hpp"
#include "cotmap/simworld.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace cotmap {

/// Where a label pixel's value came from.
enum class Provenance : std::uint8_t {
  None = 0,
  Path = 1,
  Overhead = 2,
  CloudUnknown = 3,
  MaskExtended = 4,  ///< filled from a terrain mask
  Confidence = 5,    ///< reconstruction-confidence non-traversable
  Assumed = 6,       ///< remaining unknowns forced non-traversable
};

/// 1 x H x W COT labels (0 = unknown) with a per-pixel provenance grid.
struct CotLabelImage {
  ImageF value;
  ImageU8 provenance;

  CotLabelImage() = default;
  CotLabelImage(int height, int width)
      : value(1, height, width, kUnknownCot), provenance(1, height, width, std::uint8_t(Provenance::None)) {}

  int height() const { return value.height; }
  int width() const { return value.width; }
  Provenance prov(int y, int x) const { return Provenance(provenance.at(y, x)); }
  void set(int y, int x, float v, Provenance p) {
    value.at(y, x) = v;
    provenance.at(y, x) = std::uint8_t(p);
  }
  bool operator==(const CotLabelImage&) const = default;
};

struct DepthBuffer {
  Grid<double> z;

  DepthBuffer() = default;
  DepthBuffer(int height, int width) : z(1, height, width, std::numeric_limits<double>::infinity()) {}
};

inline constexpr double kNearPlane = 1e-3;

/// Z-buffered rasterization of the mesh into `out` (pixel-center sampling, top-left
/// fill rule, near-plane clipping, strict less-than depth test).
void rasterize_mesh(const TrajectoryMesh& mesh, const Pose& camera_pose, const CameraIntrinsics& k,
                    DepthBuffer& zbuf, CotLabelImage& out);

enum class SplatMode { Overhead, Cloud };

struct SplatOptions {
  double radius = 1.0;            ///< pixels; integer offsets with dx^2 + dy^2 <= r^2
  double nontraversable_cot = 10.0;
  double depth_bias = 0.0;        ///< added to the point depth before the z-test
};

/// Overhead points write nontraversable_cot; cloud points mark the pixel unknown.
void splat_points(const PointCloud& points, SplatMode mode, const SplatOptions& opts, const Pose& camera_pose,
                  const CameraIntrinsics& k, DepthBuffer& zbuf, CotLabelImage& out);

struct LabelParams {
  CotParams cot;
  OverheadRegion overhead;
  double splat_radius = 1.0;
  /// Cloud splats lose depth ties against the mesh lying on the same ground.
  double cloud_depth_bias = 0.05;
  /// Drop path/overhead labels whose rendered depth disagrees with the keyframe's
  /// measured depth by more than abs + rel * depth (or where depth is invalid).
  bool depth_gate = true;
  double depth_gate_abs = 0.1;
  double depth_gate_rel = 0.03;
};

CotLabelImage compose_label_image(const Keyframe& keyframe, const TrajectoryMesh& mesh, const PointCloud& overhead,
                                  const PointCloud& cloud, const CameraIntrinsics& k, const LabelParams& params);

std::vector<CotLabelImage> compose_label_images(const std::vector<Keyframe>& keyframes, const TrajectoryMesh& mesh,
                                                const PointCloud& overhead, const PointCloud& cloud,
                                                const CameraIntrinsics& k, const LabelParams& params,
                                                Exec exec = Exec::Parallel);

/// Fraction of pixels with a COT label (> 0).
double coverage(const CotLabelImage& label);
double coverage(const std::vector<CotLabelImage>& labels);

}  // namespace cotmap
