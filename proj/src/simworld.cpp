#include "cotmap/simworld.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

namespace cotmap {

namespace {

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  auto cross = [](const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); };
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

// 2-D distance between segment ab and the xy footprint of a box (0 when they overlap).
double segment_box_distance(const Vec2& a, const Vec2& b, const Box& box) {
  const Vec2 lo(box.min.x(), box.min.y());
  const Vec2 hi(box.max.x(), box.max.y());
  auto inside = [&](const Vec2& p) {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
  };
  if (inside(a) || inside(b)) return 0.0;
  const Vec2 corners[4] = {lo, {hi.x(), lo.y()}, hi, {lo.x(), hi.y()}};
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    const Vec2& c = corners[i];
    const Vec2& d = corners[(i + 1) % 4];
    if (segments_cross(a, b, c, d)) return 0.0;
    best = std::min({best, point_segment_distance(c, a, b), point_segment_distance(a, c, d),
                     point_segment_distance(b, c, d)});
  }
  return best;
}

double footprint_gap(const Box& p, const Box& q) {
  const double dx = std::max({0.0, p.min.x() - q.max.x(), q.min.x() - p.max.x()});
  const double dy = std::max({0.0, p.min.y() - q.max.y(), q.min.y() - p.max.y()});
  return std::hypot(dx, dy);
}

const std::vector<Rgb>& obstacle_palette() {
  static const std::vector<Rgb> palette = {
      {190, 60, 50},  {225, 215, 195}, {35, 70, 35},  {95, 60, 140},
      {35, 35, 40},   {205, 170, 40},  {40, 110, 150}, {150, 40, 110},
  };
  return palette;
}

std::uint8_t clamp_u8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

}  // namespace

const std::vector<TerrainType>& terrain_catalog() {
  static const std::vector<TerrainType> catalog = {
      {"road", {115, 115, 120}, 8},
      {"grass", {70, 145, 55}, 25},
      {"rocks", {160, 120, 85}, 30},
      {"sand", {215, 195, 140}, 12},
  };
  return catalog;
}

std::uint64_t mix_hash(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::optional<double> Box::intersect(const Vec3& origin, const Vec3& dir, double t_min) const {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-300) {
      if (origin[a] < min[a] || origin[a] > max[a]) return std::nullopt;
      continue;
    }
    double ta = (min[a] - origin[a]) / dir[a];
    double tb = (max[a] - origin[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || t0 <= t_min) return std::nullopt;
  return t0;
}

bool Box::contains(const Vec3& p, double eps) const {
  for (int a = 0; a < 3; ++a)
    if (p[a] < min[a] - eps || p[a] > max[a] + eps) return false;
  return true;
}

bool TerrainGrid::contains_xy(double x, double y) const {
  return x >= 0.0 && y >= 0.0 && x <= width_m() && y <= height_m();
}

int TerrainGrid::terrain_at(double x, double y) const {
  const int col = std::clamp(static_cast<int>(std::floor(x / cell_size)), 0, ncols - 1);
  const int row = std::clamp(static_cast<int>(std::floor(y / cell_size)), 0, nrows - 1);
  return terrain[static_cast<std::size_t>(row) * ncols + col];
}

std::vector<int> TerrainGrid::terrain_ids_present() const {
  std::set<int> ids(terrain.begin(), terrain.end());
  return {ids.begin(), ids.end()};
}

TerrainGrid generate_world(std::uint64_t seed, const WorldLayout& layout) {
  if (layout.ncols <= 0 || layout.nrows <= 0 || !(layout.cell_size > 0.0))
    throw std::invalid_argument("generate_world: world dimensions must be positive");
  if (layout.strip_terrains.empty()) throw std::invalid_argument("generate_world: no terrain strips");
  for (int id : layout.strip_terrains)
    if (id < 0 || id >= static_cast<int>(terrain_catalog().size()))
      throw std::invalid_argument("generate_world: unknown terrain id " + std::to_string(id));
  if (layout.random_obstacles + layout.path_obstacles > kMaxObstacles)
    throw std::invalid_argument("generate_world: too many obstacles");

  TerrainGrid w;
  w.cell_size = layout.cell_size;
  w.ncols = layout.ncols;
  w.nrows = layout.nrows;
  w.terrain.resize(static_cast<std::size_t>(w.ncols) * w.nrows);

  const std::size_t nstrips = layout.strip_terrains.size();
  std::vector<double> bounds;  // right edge of each strip, meters
  if (layout.strip_widths.empty()) {
    for (std::size_t i = 1; i <= nstrips; ++i) bounds.push_back(w.width_m() * double(i) / double(nstrips));
  } else {
    if (layout.strip_widths.size() != nstrips)
      throw std::invalid_argument("generate_world: strip_widths must match strip_terrains");
    double acc = 0.0;
    for (double sw : layout.strip_widths) {
      if (!(sw > 0.0)) throw std::invalid_argument("generate_world: strip widths must be positive");
      bounds.push_back(acc += sw);
    }
    if (std::abs(acc - w.width_m()) > 1e-6)
      throw std::invalid_argument("generate_world: strip widths must sum to the world width");
  }
  for (int c = 0; c < w.ncols; ++c) {
    const double xc = (c + 0.5) * w.cell_size;
    std::size_t s = 0;
    while (s + 1 < nstrips && xc >= bounds[s]) ++s;
    for (int r = 0; r < w.nrows; ++r)
      w.terrain[static_cast<std::size_t>(r) * w.ncols + c] = static_cast<std::uint8_t>(layout.strip_terrains[s]);
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const auto& palette = obstacle_palette();
  auto pick_color = [&]() { return palette[static_cast<std::size_t>(unit(rng) * palette.size()) % palette.size()]; };

  auto clearance_to_paths = [&](const Box& b) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& path : layout.keepout_paths)
      for (std::size_t i = 0; i + 1 < path.size(); ++i)
        best = std::min(best, segment_box_distance(path[i], path[i + 1], b));
    return best;
  };
  auto clear_of_others = [&](const Box& b) {
    for (const auto& o : w.obstacles)
      if (footprint_gap(b, o) < 0.3) return false;
    return b.min.x() > 0.5 && b.min.y() > 0.5 && b.max.x() < w.width_m() - 0.5 && b.max.y() < w.height_m() - 0.5;
  };

  // Obstacles flanking a keep-out path, close enough to fall inside an overhead corridor.
  std::vector<std::pair<Vec2, Vec2>> segments;
  for (const auto& path : layout.keepout_paths)
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
      if ((path[i + 1] - path[i]).norm() > 3.0) segments.emplace_back(path[i], path[i + 1]);
  for (int n = 0, tries = 0; n < layout.path_obstacles && !segments.empty() && tries < 2000; ++tries) {
    const auto& [a, b] = segments[static_cast<std::size_t>(unit(rng) * segments.size()) % segments.size()];
    const Vec2 dir = (b - a).normalized();
    const Vec2 left(-dir.y(), dir.x());
    const double along = uniform(1.5, (b - a).norm() - 1.5);
    const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
    const double length = uniform(0.8, 2.0);
    const double depth = uniform(0.4, 1.0);
    const double height = uniform(0.9, 1.6);
    const Vec2 near_mid = a + along * dir + side * layout.path_obstacle_gap * left;
    const Vec2 far_mid = near_mid + side * depth * left;
    const Vec2 c0 = near_mid - 0.5 * length * dir, c1 = near_mid + 0.5 * length * dir;
    const Vec2 c2 = far_mid - 0.5 * length * dir, c3 = far_mid + 0.5 * length * dir;
    Box box;
    box.min = Vec3(std::min({c0.x(), c1.x(), c2.x(), c3.x()}), std::min({c0.y(), c1.y(), c2.y(), c3.y()}), 0.0);
    box.max = Vec3(std::max({c0.x(), c1.x(), c2.x(), c3.x()}), std::max({c0.y(), c1.y(), c2.y(), c3.y()}), height);
    box.color = pick_color();
    if (clearance_to_paths(box) < layout.path_obstacle_gap - 1e-9 || !clear_of_others(box)) continue;
    w.obstacles.push_back(box);
    ++n;
  }

  for (int n = 0, tries = 0; n < layout.random_obstacles && tries < 5000; ++tries) {
    const double sx = uniform(0.5, 1.5), sy = uniform(0.5, 1.5);
    const double x = uniform(0.5, w.width_m() - 0.5 - sx);
    const double y = uniform(0.5, w.height_m() - 0.5 - sy);
    Box box;
    box.min = Vec3(x, y, 0.0);
    box.max = Vec3(x + sx, y + sy, uniform(0.6, 1.5));
    box.color = pick_color();
    if (clearance_to_paths(box) < layout.keepout_margin || !clear_of_others(box)) continue;
    w.obstacles.push_back(box);
    ++n;
  }
  return w;
}

void PowerModel::validate() const {
  for (const auto& [id, k] : rolling)
    if (!(k > 0.0)) throw std::invalid_argument("power model: rolling coefficients must be positive");
  if (!(idle_power >= 0.0)) throw std::invalid_argument("power model: idle power must be >= 0");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("power model: noise std must be >= 0");
}

double PowerModel::coefficient(int terrain_id) const {
  const auto it = rolling.find(terrain_id);
  if (it == rolling.end())
    throw std::invalid_argument("power model: no coefficient for terrain " + std::to_string(terrain_id));
  return it->second;
}

PowerModel default_power_model() {
  PowerModel pm;
  pm.rolling = {{0, 0.7}, {1, 1.3}, {2, 1.8}, {3, 1.5}};
  return pm;
}

void RobotParams::validate() const {
  if (!(mass > 0.0) || !(gravity > 0.0) || !(width > 0.0))
    throw std::invalid_argument("robot parameters must be positive");
}

double terrain_cot(const PowerModel& power, const RobotParams& robot, int terrain_id, double v) {
  return power.coefficient(terrain_id) + power.idle_power / (robot.mass * robot.gravity * v);
}

std::vector<TelemetrySample> simulate_drive(const TerrainGrid& world, const PowerModel& power,
                                            const RobotParams& robot, const std::vector<Vec2>& waypoints,
                                            const DriveOptions& drive, std::uint64_t seed) {
  power.validate();
  robot.validate();
  if (waypoints.size() < 2) throw std::invalid_argument("simulate_drive: need at least two waypoints");
  if (!(drive.v_cmd > 0.0) || !(drive.dt > 0.0) || !(drive.voltage > 0.0))
    throw std::invalid_argument("simulate_drive: v_cmd, dt and voltage must be positive");
  for (const auto& w : waypoints)
    if (!world.contains_xy(w.x(), w.y())) throw std::invalid_argument("simulate_drive: waypoint outside world");
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i)
    for (const auto& box : world.obstacles)
      if (segment_box_distance(waypoints[i], waypoints[i + 1], box) < 0.5 * robot.width)
        throw std::invalid_argument("simulate_drive: path runs through an obstacle");

  std::vector<double> cum{0.0};
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i)
    cum.push_back(cum.back() + (waypoints[i + 1] - waypoints[i]).norm());
  const double total = cum.back();
  if (!(total > 0.0)) throw std::invalid_argument("simulate_drive: path has zero length");

  std::vector<double> stations;
  const double step = drive.v_cmd * drive.dt;
  const auto nsteps = static_cast<std::size_t>(std::floor(total / step + 1e-9));
  for (std::size_t k = 0; k <= nsteps; ++k) stations.push_back(std::min(total, double(k) * step));
  if (total - stations.back() > 1e-9) stations.push_back(total);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double mg = robot.mass * robot.gravity;

  std::vector<TelemetrySample> out;
  out.reserve(stations.size());
  std::size_t seg = 0;
  for (double s : stations) {
    while (seg + 2 < cum.size() && s >= cum[seg + 1]) ++seg;
    const Vec2 a = waypoints[seg], b = waypoints[seg + 1];
    const double seg_len = cum[seg + 1] - cum[seg];
    const double f = seg_len > 0.0 ? (s - cum[seg]) / seg_len : 0.0;
    const Vec2 p = a + f * (b - a);
    const double yaw = std::atan2(b.y() - a.y(), b.x() - a.x());

    TelemetrySample ts;
    ts.t = s / drive.v_cmd;
    ts.pose = Pose::from_xyz_yaw(p.x(), p.y(), 0.0, yaw);
    ts.v = drive.v_cmd;
    ts.voltage = drive.voltage;
    double pw = power.idle_power + power.coefficient(world.terrain_at(p.x(), p.y())) * mg * drive.v_cmd;
    if (power.noise_std > 0.0) pw += power.noise_std * noise(rng);
    ts.current = pw / drive.voltage;
    out.push_back(ts);
  }
  return out;
}

Keyframe render_synthetic_keyframe(const TerrainGrid& world, const Pose& camera_pose, const CameraIntrinsics& k,
                                   std::uint64_t seed, int id, const RenderOptions& opts) {
  k.validate();
  if (!(camera_pose.translation.z() > 0.0)) throw std::invalid_argument("render: camera is below the ground plane");

  Keyframe kf;
  kf.id = id;
  kf.pose = camera_pose;
  kf.rgb = ImageU8(3, k.height, k.width);
  kf.depth = ImageF(1, k.height, k.width, 0.0f);
  kf.surface = ImageU8(1, k.height, k.width, kSurfaceNone);

  const Vec3 origin = camera_pose.translation;
  const Eigen::Matrix3d rot = camera_pose.rotation.toRotationMatrix();
  const auto& catalog = terrain_catalog();
  const std::uint64_t frame_key = mix_hash(seed, static_cast<std::uint64_t>(id));

  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const Vec3 dir = rot * pixel_ray(x + 0.5, y + 0.5, k);  // camera depth == ray parameter
      double best_t = std::numeric_limits<double>::infinity();
      int hit_obstacle = -1;
      if (dir.z() < 0.0) best_t = -origin.z() / dir.z();
      for (std::size_t i = 0; i < world.obstacles.size(); ++i) {
        if (auto t = world.obstacles[i].intersect(origin, dir); t && *t < best_t) {
          best_t = *t;
          hit_obstacle = static_cast<int>(i);
        }
      }

      Rgb base = opts.sky;
      int amp = 3;
      std::uint8_t surface = kSurfaceNone;
      if (std::isfinite(best_t)) {
        if (hit_obstacle >= 0) {
          base = world.obstacles[static_cast<std::size_t>(hit_obstacle)].color;
          amp = 8;
          surface = static_cast<std::uint8_t>(kSurfaceObstacleBase + hit_obstacle);
        } else {
          const Vec3 p = origin + best_t * dir;
          const int tid = world.terrain_at(p.x(), p.y());
          base = catalog[static_cast<std::size_t>(tid)].color;
          amp = catalog[static_cast<std::size_t>(tid)].noise;
          surface = static_cast<std::uint8_t>(kSurfaceTerrainBase + tid);
        }
        if (best_t <= opts.max_depth) kf.depth.at(y, x) = static_cast<float>(best_t);
      }
      kf.surface.at(y, x) = surface;
      const std::uint64_t px_key = mix_hash(frame_key, static_cast<std::uint64_t>(y) * k.width + x);
      for (int c = 0; c < 3; ++c) {
        const std::uint64_t h = mix_hash(px_key, static_cast<std::uint64_t>(c));
        const int delta = static_cast<int>(h % static_cast<std::uint64_t>(2 * amp + 1)) - amp;
        kf.rgb.at(c, y, x) = clamp_u8(int(base[static_cast<std::size_t>(c)]) + delta);
      }
    }
  }
  return kf;
}

std::vector<Keyframe> render_synthetic_keyframes(const TerrainGrid& world, const std::vector<Pose>& camera_poses,
                                                 const CameraIntrinsics& k, std::uint64_t seed,
                                                 const RenderOptions& opts, Exec exec) {
  std::vector<Keyframe> out(camera_poses.size());
  const auto n = static_cast<std::ptrdiff_t>(camera_poses.size());
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        render_synthetic_keyframe(world, camera_poses[static_cast<std::size_t>(i)], k, seed, static_cast<int>(i), opts);
  return out;
}

std::vector<std::size_t> select_keyframes(const std::vector<Pose>& poses, double trans_thresh, double rot_thresh_deg) {
  if (poses.empty()) throw std::invalid_argument("select_keyframes: empty pose sequence");
  if (!(trans_thresh > 0.0) || !(rot_thresh_deg > 0.0))
    throw std::invalid_argument("select_keyframes: thresholds must be positive");
  const double rot_thresh = rot_thresh_deg * std::numbers::pi / 180.0;
  std::vector<std::size_t> keep{0};
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const Pose& last = poses[keep.back()];
    const double dt = (poses[i].translation - last.translation).norm();
    const double dr = rotation_angle_between(poses[i], last);
    if (dt >= trans_thresh - 1e-9 || dr >= rot_thresh - 1e-12) keep.push_back(i);
  }
  return keep;
}

PointCloud build_point_cloud(const std::vector<Keyframe>& keyframes, const CameraIntrinsics& k, int stride) {
  if (stride < 1) throw std::invalid_argument("build_point_cloud: stride must be >= 1");
  PointCloud cloud;
  for (const auto& kf : keyframes) {
    if (!kf.depth.same_shape(1, k.height, k.width))
      throw std::invalid_argument("build_point_cloud: keyframe does not match intrinsics");
    for (int y = 0; y < k.height; y += stride)
      for (int x = 0; x < k.width; x += stride) {
        const float d = kf.depth.at(y, x);
        if (!(d > 0.0f)) continue;
        cloud.push_back(transform_point(unproject_pixel({x + 0.5, y + 0.5, d}, k), kf.pose));
      }
  }
  return cloud;
}

}  // namespace cotmap
