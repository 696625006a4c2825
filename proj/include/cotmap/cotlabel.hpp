#pragma once

#include "cotmap/geometry.hpp"
#include "cotmap/simworld.hpp"

#include <array>
#include <optional>
#include <vector>

namespace cotmap {

/// Reserved label value for "unknown"; excluded from every mean and loss.
inline constexpr float kUnknownCot = 0.0f;

struct CotParams {
  double mass = 10.0;
  double gravity = 9.81;
  double horizon = 5.0;  ///< meters of trajectory per moving-average window
  double nontraversable_cot = 10.0;

  void validate() const;
};

/// Smoothed COT per telemetry sample, indexed like the input.
struct CotSeries {
  std::vector<double> s;    ///< arc length, meters
  std::vector<double> cot;
};

/// Windowed COT = (sum of P*dt over the window) / (m*g*window arc length).
///
/// Each sample's power holds over the interval to the next sample, and that
/// energy is spread uniformly over the interval's arc length. Windows span
/// `horizon` meters centered on the sample; near the trajectory ends they are
/// slid inward so they stay inside it, and they cover the whole trajectory
/// when it is shorter than the horizon.
CotSeries compute_cot_series(const std::vector<TelemetrySample>& telemetry, const CotParams& params);

struct TrajectoryMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<double> cot;  ///< per triangle
  double width = 0.0;

  double area() const;
};

TrajectoryMesh build_trajectory_mesh(const std::vector<Pose>& poses, const CotSeries& series, double width);

struct OverheadRegion {
  double lateral_half_extent = 0.5;
  double vertical_half_extent = 0.85;
  double vertical_offset = 0.3;  ///< bottom of the box above the robot pose
  double max_range = 8.0;

  void validate() const;
};

/// Points inside the rectangular prism swept above the trajectory. When `reference`
/// is given, only trajectory segments within `max_range` of it contribute.
PointCloud extract_overhead_points(const PointCloud& cloud, const std::vector<Pose>& poses,
                                   const OverheadRegion& region, std::optional<Vec3> reference = std::nullopt,
                                   Exec exec = Exec::Parallel);

}  // namespace cotmap
