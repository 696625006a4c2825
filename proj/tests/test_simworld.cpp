#include "cotmap/cotlabel.hpp"
#include "cotmap/simworld.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace cotmap;

namespace {

// Camera axes in world coordinates: x -> +x, y -> -y, z -> -z.
Pose looking_down(double x, double y, double h) {
  Pose p;
  p.translation = {x, y, h};
  Eigen::Matrix3d r;
  r << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  p.rotation = Quat(r);
  return p;
}

WorldLayout small_layout() {
  WorldLayout l;
  l.ncols = 40;
  l.nrows = 60;
  return l;
}

}  // namespace

TEST_CASE("generate_world strip layout and determinism") {
  const TerrainGrid w = generate_world(0, small_layout());
  REQUIRE(w.terrain.size() == 40u * 60u);
  for (int r = 0; r < w.nrows; ++r)
    for (int c = 0; c < w.ncols; ++c) CHECK(w.terrain[std::size_t(r * w.ncols + c)] == (c < 20 ? 0 : 1));
  CHECK(w.terrain_ids_present() == std::vector<int>{0, 1});

  WorldLayout l = small_layout();
  l.random_obstacles = 4;
  const TerrainGrid a = generate_world(5, l), b = generate_world(5, l);
  CHECK(a.terrain == b.terrain);
  REQUIRE(a.obstacles.size() == b.obstacles.size());
  for (std::size_t i = 0; i < a.obstacles.size(); ++i) {
    CHECK(a.obstacles[i].min == b.obstacles[i].min);
    CHECK(a.obstacles[i].max == b.obstacles[i].max);
  }

  l.ncols = 0;
  CHECK_THROWS_AS(generate_world(0, l), std::invalid_argument);
  l = small_layout();
  l.strip_terrains = {0, 99};
  CHECK_THROWS_AS(generate_world(0, l), std::invalid_argument);
}

TEST_CASE("simulate_drive power and COT") {
  WorldLayout l = small_layout();
  l.strip_terrains = {0};
  const TerrainGrid w = generate_world(1, l);
  PowerModel pm;
  pm.rolling = {{0, 1.0}};
  RobotParams robot;
  robot.mass = 10.0;
  robot.gravity = 10.0;  // m*g = 100 N
  DriveOptions d;
  d.v_cmd = 1.0;
  const std::vector<Vec2> wp{{1, 1}, {1, 5}, {3, 5}};
  const auto tel = simulate_drive(w, pm, robot, wp, d, 0);
  REQUIRE(tel.size() > 10);
  for (const auto& s : tel) CHECK(std::abs(s.power() - 100.0) < 1e-9);
  for (std::size_t i = 1; i < tel.size(); ++i) CHECK(tel[i].t > tel[i - 1].t);

  CotParams cp;
  cp.mass = robot.mass;
  cp.gravity = robot.gravity;
  const auto series = compute_cot_series(tel, cp);
  for (double c : series.cot) CHECK(std::abs(c - 1.0) < 1e-12);

  d.v_cmd = 2.0;
  const auto fast = simulate_drive(w, pm, robot, wp, d, 0);
  for (const auto& s : fast) CHECK(std::abs(s.power() - 200.0) < 1e-9);
  for (double c : compute_cot_series(fast, cp).cot) CHECK(std::abs(c - 1.0) < 1e-12);

  CHECK_THROWS_AS(simulate_drive(w, pm, robot, {}, d, 0), std::invalid_argument);
  CHECK_THROWS_AS(simulate_drive(w, pm, robot, {{1, 1}, {100, 1}}, d, 0), std::invalid_argument);
}

TEST_CASE("power ordering across terrains") {
  const TerrainGrid w = generate_world(2, small_layout());
  const PowerModel pm = default_power_model();
  const RobotParams robot;
  DriveOptions d;
  const auto left = simulate_drive(w, pm, robot, {{1, 1}, {1, 5}}, d, 0);
  const auto right = simulate_drive(w, pm, robot, {{3, 1}, {3, 5}}, d, 0);
  double pl = 0, pr = 0;
  for (const auto& s : left) pl += s.power() / double(left.size());
  for (const auto& s : right) pr += s.power() / double(right.size());
  REQUIRE(pm.coefficient(1) > pm.coefficient(0));
  CHECK(pr > pl);
  CHECK(terrain_cot(pm, robot, 1, 1.0) > terrain_cot(pm, robot, 0, 1.0));
}

TEST_CASE("render_synthetic_keyframe geometry") {
  WorldLayout l = small_layout();
  l.strip_terrains = {0};
  const TerrainGrid w = generate_world(3, l);
  CameraIntrinsics k;
  const double h = 1.5;
  const Keyframe kf = render_synthetic_keyframe(w, looking_down(2, 3, h), k, 9);
  const auto& road = terrain_catalog()[0];
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      CHECK(std::abs(kf.depth.at(y, x) - h) < 1e-4);
      CHECK(kf.surface.at(y, x) == kSurfaceTerrainBase + 0);
      for (int c = 0; c < 3; ++c) CHECK(std::abs(int(kf.rgb.at(c, y, x)) - int(road.color[std::size_t(c)])) <= road.noise);
    }
  CHECK_THROWS(render_synthetic_keyframe(w, looking_down(2, 3, -1), k, 9));
}

TEST_CASE("render: obstacle in front of ground and depth consistency") {
  WorldLayout l = small_layout();
  TerrainGrid w = generate_world(3, l);
  Box b;
  b.min = {1.5, 2.5, 0.0};
  b.max = {2.5, 3.5, 0.8};
  b.color = {200, 0, 0};
  w.obstacles.push_back(b);
  CameraIntrinsics k;
  const Pose cam = looking_down(2, 3, 2.0);
  const Keyframe kf = render_synthetic_keyframe(w, cam, k, 1);
  const int cy = k.height / 2, cx = k.width / 2;
  CHECK(std::abs(kf.depth.at(cy, cx) - 1.2f) < 1e-4);  // box top at 0.8 m
  CHECK(surface_is_obstacle(kf.surface.at(cy, cx)));
  CHECK(std::abs(kf.depth.at(0, 0) - 2.0f) < 1e-4);
  CHECK(surface_is_terrain(kf.surface.at(0, 0)));

  // Per-pixel ray cast: each valid depth re-projects into its own pixel.
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const float d = kf.depth.at(y, x);
      if (!(d > 0)) continue;
      const Vec2 uv = project_point(unproject_pixel({x + 0.5, y + 0.5, d}, k), k);
      CHECK(std::abs(uv.x() - (x + 0.5)) < 0.5);
      CHECK(std::abs(uv.y() - (y + 0.5)) < 0.5);
    }
}

TEST_CASE("select_keyframes examples") {
  std::vector<Pose> straight;
  for (int i = 0; i <= 100; ++i) straight.push_back(Pose::from_xyz_yaw(0.1 * i, 0, 0, 0));
  const auto idx = select_keyframes(straight, 1.0, 30.0);
  REQUIRE(idx.size() == 11u);
  for (std::size_t i = 0; i < idx.size(); ++i) CHECK(idx[i] == 10 * i);

  const std::vector<Pose> still(20, Pose::from_xyz_yaw(1, 2, 0, 0.3));
  CHECK(select_keyframes(still, 0.5, 10.0).size() == 1u);
  CHECK_THROWS_AS(select_keyframes({}, 0.5, 10.0), std::invalid_argument);
}

TEST_CASE("build_point_cloud examples") {
  WorldLayout l = small_layout();
  const TerrainGrid w = generate_world(4, l);
  CameraIntrinsics k;
  const Keyframe a = render_synthetic_keyframe(w, looking_down(2, 3, 1.0), k, 0, 0);
  const Keyframe b = render_synthetic_keyframe(w, looking_down(2.2, 3, 1.0), k, 0, 1);

  const auto one = build_point_cloud({a}, k, k.width);
  CHECK(one.size() <= std::size_t(k.height));
  CHECK(!one.empty());

  const auto ca = build_point_cloud({a}, k, 3), cb = build_point_cloud({b}, k, 3);
  for (const auto& p : ca) CHECK(std::abs(p.z()) < 1e-4);
  const auto both = build_point_cloud({a, b}, k, 3);
  REQUIRE(both.size() == ca.size() + cb.size());
  CHECK(std::equal(ca.begin(), ca.end(), both.begin()));
  CHECK(std::equal(cb.begin(), cb.end(), both.begin() + std::ptrdiff_t(ca.size())));
  CHECK_THROWS(build_point_cloud({a}, k, 0));
}

TEST_CASE("simulation determinism") {
  WorldLayout l = small_layout();
  l.random_obstacles = 2;
  l.keepout_paths = {{{1, 1}, {1, 5}}};
  const TerrainGrid w = generate_world(8, l);
  PowerModel pm = default_power_model();
  pm.noise_std = 2.0;
  const auto a = simulate_drive(w, pm, RobotParams{}, {{1, 1}, {1, 5}}, DriveOptions{}, 11);
  const auto b = simulate_drive(w, pm, RobotParams{}, {{1, 1}, {1, 5}}, DriveOptions{}, 11);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].current == b[i].current);

  CameraIntrinsics k;
  std::vector<Pose> poses{looking_down(1, 1, 1), looking_down(2, 2, 1.2)};
  const auto s = render_synthetic_keyframes(w, poses, k, 5, {}, Exec::Serial);
  const auto p = render_synthetic_keyframes(w, poses, k, 5, {}, Exec::Parallel);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s[i].rgb == p[i].rgb);
    CHECK(s[i].depth == p[i].depth);
    CHECK(s[i].surface == p[i].surface);
  }
}
