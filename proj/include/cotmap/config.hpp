#pragma once

#include "cotmap/augment.hpp"
#include "cotmap/cotlabel.hpp"
#include "cotmap/plan.hpp"
#include "cotmap/recon.hpp"
#include "cotmap/regress.hpp"
#include "cotmap/render.hpp"
#include "cotmap/simworld.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cotmap {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SimConfig {
  CameraIntrinsics camera;
  double mount_height = 0.5;
  double pitch_deg = 20.0;
  WorldLayout world;
  std::vector<Vec2> waypoints{{6.0, 2.0}, {6.0, 38.0}, {18.0, 38.0}, {18.0, 2.0}};
  DriveOptions drive;
  PowerModel power = default_power_model();
  RobotParams robot;
  double kf_trans = 0.5;
  double kf_rot_deg = 10.0;
  RenderOptions render;
  int cloud_stride = 4;
};

struct AugmentConfig {
  std::string masks = "oracle";  ///< "oracle" or a directory of per-keyframe mask stacks
  int min_mask_pixels = 8;
  double depth_scale = 8.0;
  ReconTrainConfig recon;
  BoundaryPolicy boundary;
};

struct MapConfig {
  double cell_size = 0.1;
  Vec2 origin = Vec2::Zero();
  int rows = 0;  ///< 0: cover the simulated world
  int cols = 0;
};

struct PlanConfig {
  Vec2 start{6.0, 3.0};
  Vec2 goal{18.0, 3.0};
  int connectivity = 8;
  UnknownPolicy unknown;
  std::optional<double> hard_forbid;
};

struct RunConfig {
  std::uint64_t seed = 7;
  LabelMode mode = LabelMode::C_SAM;
  int jobs = 0;
  SimConfig sim;
  LabelParams label;
  AugmentConfig augment;
  RegressorConfig regress;
  int holdout_every = 5;  ///< every n-th keyframe is held out from training
  MapConfig map;
  PlanConfig plan;

  /// Cross-module checks; throws ConfigError.
  void validate() const;
  /// Label parameters with mass and gravity taken from the robot.
  CotParams cot() const;
};

/// Reads a JSON document; every key must be known (errors name the offending key).
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string dump_config(const RunConfig& cfg);

/// Stage-specific seed derived from the root seed.
std::uint64_t stage_seed(std::uint64_t root, const char* stage);

}  // namespace cotmap
