#pragma once

#include "cotmap/geometry.hpp"
#include "cotmap/image.hpp"

#include <filesystem>
#include <limits>
#include <utility>
#include <vector>

namespace cotmap {

inline constexpr double kNoDistance = std::numeric_limits<double>::infinity();

// Cell (row, col) covers x in (ox + col*cs, ox + (col+1)*cs] and likewise for y with
// rows, so a point on a shared edge belongs to the lower-index cell.
int bev_index(double coord, double origin, double cell_size);

/// Sparse-footprint local map on the world lattice (origin is a multiple of cell_size).
struct LocalBevMap {
  Vec2 origin = Vec2::Zero();
  double cell_size = 0.1;
  int rows = 0;
  int cols = 0;
  std::vector<double> cot;       ///< 0 where empty
  std::vector<double> distance;  ///< kNoDistance where empty

  bool occupied(int r, int c) const { return distance[std::size_t(r) * cols + c] < kNoDistance; }
  std::size_t occupied_count() const;
};

/// Each pixel with depth > 0 and COT > 0 is unprojected, dropped to the ground plane
/// and binned; a cell keeps the value seen at the smallest camera-to-point distance.
LocalBevMap project_to_local_bev(const ImageF& cot_image, const ImageF& depth, const Pose& camera_pose,
                                 const CameraIntrinsics& k, double cell_size);

/// 2 x M x N grid: channel 0 COT (0 = unknown), channel 1 closest update distance.
struct GlobalBevMap {
  Vec2 origin = Vec2::Zero();
  double cell_size = 0.1;
  Grid<double> grid;

  GlobalBevMap() = default;
  GlobalBevMap(Vec2 origin, double cell_size, int rows, int cols);

  int rows() const { return grid.height; }
  int cols() const { return grid.width; }
  double& cot(int r, int c) { return grid.at(0, r, c); }
  double cot(int r, int c) const { return grid.at(0, r, c); }
  double& distance(int r, int c) { return grid.at(1, r, c); }
  double distance(int r, int c) const { return grid.at(1, r, c); }
  bool known(int r, int c) const { return distance(r, c) < kNoDistance; }
  /// World xy of a cell center.
  Vec2 center(int r, int c) const;
  bool operator==(const GlobalBevMap&) const = default;
};

/// Drops the part of `local` that falls outside `global`'s extent.
LocalBevMap crop_to_extent(const LocalBevMap& local, const GlobalBevMap& global);

/// Overwrites both channels where the local distance is strictly smaller.
void merge_into_global(GlobalBevMap& global, const LocalBevMap& local);

struct CellQuery {
  double cot = 0.0;
  double distance = kNoDistance;
  int row = 0;
  int col = 0;
};

CellQuery query_cell(const GlobalBevMap& global, const Vec2& world_xy);

void write_global_map(const std::filesystem::path& tensor_path, const std::filesystem::path& meta_path,
                      const GlobalBevMap& map);
GlobalBevMap read_global_map(const std::filesystem::path& tensor_path, const std::filesystem::path& meta_path);

}  // namespace cotmap
