#pragma once

#include "cotmap/geometry.hpp"
#include "cotmap/image.hpp"
#include "cotmap/parallel.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cotmap {

using Rgb = std::array<std::uint8_t, 3>;
using PointCloud = std::vector<Vec3>;

struct TerrainType {
  std::string name;
  Rgb color;
  int noise;  ///< per-channel uniform texture amplitude
};

/// Built-in terrain catalog; ids index this table.
const std::vector<TerrainType>& terrain_catalog();

// Per-pixel ground-truth surface ids, stored alongside each keyframe.
inline constexpr std::uint8_t kSurfaceNone = 0;
inline constexpr std::uint8_t kSurfaceTerrainBase = 1;
inline constexpr std::uint8_t kSurfaceObstacleBase = 64;
inline constexpr int kMaxObstacles = 255 - kSurfaceObstacleBase;

inline bool surface_is_terrain(std::uint8_t s) { return s >= kSurfaceTerrainBase && s < kSurfaceObstacleBase; }
inline bool surface_is_obstacle(std::uint8_t s) { return s >= kSurfaceObstacleBase; }
inline int surface_terrain_id(std::uint8_t s) { return int(s) - kSurfaceTerrainBase; }
inline int surface_obstacle_index(std::uint8_t s) { return int(s) - kSurfaceObstacleBase; }

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  Rgb color{0, 0, 0};

  /// Slab test; returns the entry parameter along origin + t*dir when t > t_min.
  std::optional<double> intersect(const Vec3& origin, const Vec3& dir, double t_min = 1e-9) const;
  bool contains(const Vec3& p, double eps = 0.0) const;
};

/// Flat ground (z = 0) partitioned into terrain cells, plus box obstacles.
struct TerrainGrid {
  double cell_size = 0.1;
  int ncols = 0;  ///< along world x
  int nrows = 0;  ///< along world y
  std::vector<std::uint8_t> terrain;  ///< row-major, nrows x ncols
  std::vector<Box> obstacles;

  double width_m() const { return ncols * cell_size; }
  double height_m() const { return nrows * cell_size; }
  bool contains_xy(double x, double y) const;
  /// Terrain id at a world point; points outside the grid take the nearest edge cell.
  int terrain_at(double x, double y) const;
  std::vector<int> terrain_ids_present() const;
};

struct WorldLayout {
  int ncols = 240;
  int nrows = 440;
  double cell_size = 0.1;
  /// Terrain ids of equal-width vertical strips along x, left to right.
  std::vector<int> strip_terrains{0, 1};
  /// Optional strip widths in meters; must sum to the world width when given.
  std::vector<double> strip_widths;
  int random_obstacles = 0;
  int path_obstacles = 0;
  /// Obstacles stay this far (footprint to centerline) from every keep-out path.
  double keepout_margin = 1.2;
  /// Lateral clearance between a path obstacle's near face and the path centerline.
  double path_obstacle_gap = 0.35;
  std::vector<std::vector<Vec2>> keepout_paths;
};

TerrainGrid generate_world(std::uint64_t seed, const WorldLayout& layout);

struct PowerModel {
  std::map<int, double> rolling;  ///< terrain id -> k_t
  double idle_power = 0.0;        ///< P0, watts
  double noise_std = 0.0;         ///< watts

  void validate() const;
  double coefficient(int terrain_id) const;
};

PowerModel default_power_model();

struct RobotParams {
  double mass = 10.0;
  double gravity = 9.81;
  double width = 0.5;

  void validate() const;
};

struct TelemetrySample {
  double t = 0.0;
  Pose pose;
  double v = 0.0;
  double current = 0.0;
  double voltage = 24.0;

  double power() const { return current * voltage; }
};

/// Ground-truth COT of a terrain under a power model at speed v (noise free).
double terrain_cot(const PowerModel& power, const RobotParams& robot, int terrain_id, double v);

struct DriveOptions {
  double v_cmd = 1.0;
  double dt = 0.1;
  double voltage = 24.0;
};

std::vector<TelemetrySample> simulate_drive(const TerrainGrid& world, const PowerModel& power,
                                            const RobotParams& robot, const std::vector<Vec2>& waypoints,
                                            const DriveOptions& drive, std::uint64_t seed);

struct Keyframe {
  int id = 0;
  Pose pose;     ///< world-from-camera
  ImageU8 rgb;   ///< 3 x H x W
  ImageF depth;  ///< 1 x H x W meters, 0 = invalid
  ImageU8 surface;  ///< 1 x H x W ground-truth surface ids (simulation only)
};

struct RenderOptions {
  double max_depth = 8.0;
  Rgb sky{170, 200, 235};
};

Keyframe render_synthetic_keyframe(const TerrainGrid& world, const Pose& camera_pose,
                                   const CameraIntrinsics& k, std::uint64_t seed, int id = 0,
                                   const RenderOptions& opts = {});

std::vector<Keyframe> render_synthetic_keyframes(const TerrainGrid& world, const std::vector<Pose>& camera_poses,
                                                 const CameraIntrinsics& k, std::uint64_t seed,
                                                 const RenderOptions& opts = {}, Exec exec = Exec::Parallel);

std::vector<std::size_t> select_keyframes(const std::vector<Pose>& poses, double trans_thresh,
                                          double rot_thresh_deg);

PointCloud build_point_cloud(const std::vector<Keyframe>& keyframes, const CameraIntrinsics& k, int stride);

/// Counter-based hash mixer for reproducible per-pixel noise.
std::uint64_t mix_hash(std::uint64_t a, std::uint64_t b);

}  // namespace cotmap
