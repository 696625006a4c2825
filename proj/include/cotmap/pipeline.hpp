#pragma once

// Disk-backed pipeline stages. Each stage reads only the artifacts it declares from
// the dataset directory and writes its own outputs there.
//
//   simulate  world.json world_terrain.cott telemetry.jsonl poses.csv cloud.ply
//             keyframes/{poses.csv, kf_NNNN_{rgb,depth,surface,truth}.cott}
//   label     cot_series.csv labels/sl/ label.json
//   augment   masks/ labels/{sl-sam,un-sam,c-sam}/ augment/ coverage.csv
//   train     models/<mode>/
//   predict   pred/<mode>/
//   map       map/<mode>/{global,source}.{cott,json} global.ppm
//   plan      plan/<mode>/
//   eval      eval/<mode>/eval.json

#include "cotmap/bev.hpp"
#include "cotmap/config.hpp"
#include "cotmap/render.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace cotmap {

namespace fs = std::filesystem;

class MissingArtifact : public std::runtime_error {
 public:
  explicit MissingArtifact(const fs::path& p) : std::runtime_error("missing artifact: " + p.string()) {}
};

void run_simulate(const RunConfig& cfg, const fs::path& dir);
void run_label(const RunConfig& cfg, const fs::path& dir);
void run_augment(const RunConfig& cfg, const fs::path& dir);
void run_train(const RunConfig& cfg, const fs::path& dir);
void run_predict(const RunConfig& cfg, const fs::path& dir);
void run_map(const RunConfig& cfg, const fs::path& dir);
void run_plan(const RunConfig& cfg, const fs::path& dir);
void run_eval(const RunConfig& cfg, const fs::path& dir);

/// simulate through eval for cfg.mode.
void run_all(const RunConfig& cfg, const fs::path& dir);

// Artifact access shared by the stages and the acceptance suite.

fs::path keyframe_file(const fs::path& dir, int id, const char* kind);
fs::path label_file(const fs::path& dir, LabelMode mode, int id);
fs::path sl_label_file(const fs::path& dir, int id);

void write_world(const fs::path& dir, const TerrainGrid& world, const PowerModel& power, const RobotParams& robot,
                 double v_cmd, double nontraversable_cot);
TerrainGrid read_world(const fs::path& dir);

std::vector<Pose> read_keyframe_poses(const fs::path& dir);
Keyframe read_keyframe(const fs::path& dir, int id);
CotLabelImage read_label(const fs::path& path);
void write_label(const fs::path& path, const CotLabelImage& label);

/// Ground-truth COT per surface id (terrain COT, obstacles non-traversable, sky unknown).
ImageF truth_cot_image(const ImageU8& surface, const PowerModel& power, const RobotParams& robot, double v,
                       double nontraversable_cot);

bool is_holdout(int keyframe_id, int holdout_every);

struct CoverageRow {
  std::string stage;
  double coverage = 0.0;
};
std::vector<CoverageRow> read_coverage(const fs::path& dir);

struct TerrainRecovery {
  int terrain = 0;
  std::string name;
  double truth = 0.0;
  double map_mean = 0.0;
  double rel_error = 0.0;
  std::size_t cells = 0;
};

struct MapEvaluation {
  std::vector<TerrainRecovery> terrains;  ///< traversed terrains only
  std::size_t obstacle_cells = 0;
  double obstacle_mean = 0.0;
  double obstacle_within_tol = 0.0;  ///< fraction of obstacle cells within `tol` of the sentinel
};

/// Compares a global map against the surface ids behind its observations (`source` holds
/// surface id + 1 per cell). Terrain means use terrain-sourced cells whose centre lies at
/// least `margin` metres from other terrain and from obstacle footprints; every
/// obstacle-sourced cell counts toward the obstacle statistics.
MapEvaluation evaluate_map(const GlobalBevMap& map, const GlobalBevMap& source, const TerrainGrid& world,
                           const std::vector<int>& traversed, const PowerModel& power, const RobotParams& robot,
                           double v, double nontraversable_cot, double tol, double margin = 0.5);

/// Terrain ids under the recorded drive.
std::vector<int> traversed_terrains(const fs::path& dir, const TerrainGrid& world);

}  // namespace cotmap
