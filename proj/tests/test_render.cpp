#include "cotmap/render.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cotmap;

namespace {

CameraIntrinsics small_camera() {
  CameraIntrinsics k;
  k.width = 16;
  k.height = 12;
  k.fx = k.fy = 10.0;
  k.cx = 8.0;
  k.cy = 6.0;
  return k;
}

// Camera-frame triangle at constant depth covering the whole view.
TrajectoryMesh wall(double z, double cot) {
  TrajectoryMesh m;
  m.vertices = {{-10 * z, -10 * z, z}, {10 * z, -10 * z, z}, {0, 10 * z, z}};
  m.triangles = {{0, 1, 2}};
  m.cot = {cot};
  return m;
}

}  // namespace

TEST_CASE("rasterize_mesh examples") {
  const auto k = small_camera();
  CotLabelImage out(k.height, k.width);
  DepthBuffer zb(k.height, k.width);
  rasterize_mesh(wall(2.0, 1.3), Pose{}, k, zb, out);
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      CHECK(out.value.at(y, x) == 1.3f);
      CHECK(out.prov(y, x) == Provenance::Path);
      CHECK(std::abs(zb.z.at(y, x) - 2.0) < 1e-12);
    }

  rasterize_mesh(wall(1.0, 0.7), Pose{}, k, zb, out);
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) CHECK(out.value.at(y, x) == 0.7f);

  CotLabelImage none(k.height, k.width);
  DepthBuffer zn(k.height, k.width);
  rasterize_mesh(wall(-1.0, 0.7), Pose{}, k, zn, none);
  CHECK(none == CotLabelImage(k.height, k.width));
}

TEST_CASE("shared edge is drawn exactly once") {
  // Two triangles splitting a square along its diagonal; every pixel is owned by exactly one.
  const auto k = small_camera();
  TrajectoryMesh m;
  // The diagonal from (4, 2) to (12, 10) passes through pixel centres.
  m.vertices = {{-0.4, -0.4, 1}, {0.4, -0.4, 1}, {0.4, 0.4, 1}, {-0.4, 0.4, 1}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  m.cot = {1.0, 2.0};
  TrajectoryMesh a = m;
  a.triangles.pop_back();
  a.cot.pop_back();
  TrajectoryMesh b = m;
  b.triangles.erase(b.triangles.begin());
  b.cot.erase(b.cot.begin());
  CotLabelImage ia(k.height, k.width), ib(k.height, k.width);
  DepthBuffer za(k.height, k.width), zbb(k.height, k.width);
  rasterize_mesh(a, Pose{}, k, za, ia);
  rasterize_mesh(b, Pose{}, k, zbb, ib);
  int covered = 0;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const bool in_a = ia.value.at(y, x) > 0, in_b = ib.value.at(y, x) > 0;
      CHECK(!(in_a && in_b));
      covered += in_a || in_b;
    }
  CHECK(covered == 8 * 8);
}

TEST_CASE("splat_points examples") {
  const auto k = small_camera();
  SplatOptions so;
  so.radius = 0;
  so.nontraversable_cot = 10.0;
  {
    CotLabelImage out(k.height, k.width);
    DepthBuffer zb(k.height, k.width);
    splat_points({{0.05, 0.05, 1.0}}, SplatMode::Overhead, so, Pose{}, k, zb, out);
    int n = 0;
    for (float v : out.value.data) n += v == 10.0f;
    CHECK(n == 1);
    CHECK(out.value.at(6, 8) == 10.0f);
    CHECK(out.prov(6, 8) == Provenance::Overhead);
  }
  {
    CotLabelImage out(k.height, k.width);
    DepthBuffer zb(k.height, k.width);
    rasterize_mesh(wall(0.5, 1.1), Pose{}, k, zb, out);
    const auto before = out;
    splat_points({{0.05, 0.05, 1.0}}, SplatMode::Overhead, so, Pose{}, k, zb, out);
    CHECK(out == before);
  }
  {
    CotLabelImage out(k.height, k.width);
    DepthBuffer zb(k.height, k.width);
    splat_points({{0.05, 0.05, 1.0}}, SplatMode::Cloud, so, Pose{}, k, zb, out);
    CHECK(out.prov(6, 8) == Provenance::CloudUnknown);
    CHECK(out.value.at(6, 8) == 0.0f);
  }
  {
    SplatOptions r1 = so;
    r1.radius = 1.0;
    CotLabelImage out(k.height, k.width);
    DepthBuffer zb(k.height, k.width);
    splat_points({{0.05, 0.05, 1.0}}, SplatMode::Overhead, r1, Pose{}, k, zb, out);
    int n = 0;
    for (float v : out.value.data) n += v == 10.0f;
    CHECK(n == 5);
    SplatOptions neg = so;
    neg.radius = -1;
    CHECK_THROWS(splat_points({}, SplatMode::Overhead, neg, Pose{}, k, zb, out));
  }
}

TEST_CASE("rasterizer matches a brute-force ray cast on random scenes") {
  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0;
  double worst = 0.0;
  for (int i = 0; i < 60; ++i) {
    const auto scene = oracle::random_scene(rng);
    const auto r = oracle::render(scene);
    const auto c = oracle::compare(scene, r, oracle::raycast(scene));
    mismatches += c.winner_mismatch;
    worst = std::max(worst, c.max_depth_error);
  }
  CHECK(mismatches == 0u);
  CHECK(worst < 1e-5);
}

TEST_CASE("geometry strictly behind the z-buffer changes nothing") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 20; ++i) {
    auto scene = oracle::random_scene(rng);
    scene.overhead.clear();
    scene.cloud.clear();
    const auto k = scene.k;
    CotLabelImage out(k.height, k.width);
    DepthBuffer zb(k.height, k.width);
    const TrajectoryMesh near_wall = wall(0.2, 0.9);
    // Put the wall in front of the camera in world coordinates.
    TrajectoryMesh w = near_wall;
    for (auto& v : w.vertices) v = transform_point(v, scene.pose);
    rasterize_mesh(w, scene.pose, k, zb, out);
    const auto before = out;
    TrajectoryMesh far = scene.mesh;
    for (auto& v : far.vertices) {
      const Vec3 c = transform_point(v, scene.pose.inverse());
      v = transform_point(Vec3(c.x(), c.y(), std::abs(c.z()) + 0.3), scene.pose);
    }
    rasterize_mesh(far, scene.pose, k, zb, out);
    CHECK(out == before);
  }
}

TEST_CASE("compose_label_image and coverage") {
  CameraIntrinsics k;
  Keyframe kf;
  kf.pose = Pose{};
  kf.depth = ImageF(1, k.height, k.width, 0.0f);
  LabelParams lp;
  lp.depth_gate = false;
  // Facing away from everything.
  TrajectoryMesh behind = wall(-2.0, 1.0);
  const auto empty = compose_label_image(kf, behind, {}, {}, k, lp);
  CHECK(coverage(empty) == 0.0);
  for (auto p : empty.provenance.data) CHECK(p == std::uint8_t(Provenance::None));

  const auto full = compose_label_image(kf, wall(2.0, 1.0), {}, {}, k, lp);
  CHECK(coverage(full) == 1.0);
  CHECK(coverage(std::vector<CotLabelImage>{empty, full}) == 0.5);

  // Overhead points in view label their pixels non-traversable; cloud points at the same depth lose the tie.
  const PointCloud over{{0.0, 0.0, 1.0}};
  const auto o = compose_label_image(kf, behind, over, over, k, lp);
  const int u = int(std::floor(k.cx)), v = int(std::floor(k.cy));
  CHECK(o.value.at(v, u) == float(lp.cot.nontraversable_cot));
  CHECK(o.prov(v, u) == Provenance::Overhead);

  // Depth gate: rendered depth must agree with the measured depth.
  lp.depth_gate = true;
  kf.depth = ImageF(1, k.height, k.width, 2.0f);
  kf.depth.at(0, 0) = 5.0f;
  kf.depth.at(0, 1) = 0.0f;
  const auto gated = compose_label_image(kf, wall(2.0, 1.0), {}, {}, k, lp);
  CHECK(gated.value.at(0, 0) == 0.0f);
  CHECK(gated.value.at(0, 1) == 0.0f);
  CHECK(gated.value.at(5, 5) == 1.0f);

  const std::vector<Keyframe> kfs{kf, kf};
  CHECK(compose_label_images(kfs, wall(2.0, 1.0), {}, {}, k, lp, Exec::Serial) ==
        compose_label_images(kfs, wall(2.0, 1.0), {}, {}, k, lp, Exec::Parallel));
}
