#include "cotmap/bev.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

using namespace cotmap;

namespace {

CameraIntrinsics tiny_camera() {
  CameraIntrinsics k;
  k.width = 5;
  k.height = 5;
  k.fx = k.fy = 5.0;
  k.cx = 2.5;
  k.cy = 2.5;
  return k;
}

// Camera at height 0 looking along world +x: camera z -> world x, camera x -> world -y, camera y -> world -z.
Pose forward_camera() {
  Pose p;
  Eigen::Matrix3d r;
  r << 0, 0, 1, -1, 0, 0, 0, -1, 0;
  p.rotation = Quat(r);
  return p;
}

LocalBevMap single(Vec2 origin, double cot, double dist, double cs = 1.0) {
  LocalBevMap l;
  l.origin = origin;
  l.cell_size = cs;
  l.rows = l.cols = 1;
  l.cot = {cot};
  l.distance = {dist};
  return l;
}

}  // namespace

TEST_CASE("project_to_local_bev examples") {
  const auto k = tiny_camera();
  ImageF cot(1, 5, 5, 0.0f), depth(1, 5, 5, 0.0f);
  cot.at(2, 2) = 1.4f;
  depth.at(2, 2) = 2.0f;
  const auto l = project_to_local_bev(cot, depth, forward_camera(), k, 0.1);
  CHECK(l.occupied_count() == 1u);
  REQUIRE(l.rows == 1);
  REQUIRE(l.cols == 1);
  CHECK(l.distance[0] == doctest::Approx(2.0));
  CHECK(l.cot[0] == doctest::Approx(1.4));
  // The cell containing x = 2 (edge rule: (1.9, 2.0]).
  CHECK(l.origin.x() <= 2.0 + 1e-9);
  CHECK(l.origin.x() + 0.1 >= 2.0 - 1e-9);

  // Two pixels in one cell keep the nearer observation.
  ImageF c2(1, 5, 5, 0.0f), d2(1, 5, 5, 0.0f);
  c2.at(2, 3) = 0.7f;
  d2.at(2, 3) = 1.5f;
  c2.at(3, 3) = 1.9f;
  d2.at(3, 3) = 3.0f;
  const auto m = project_to_local_bev(c2, d2, forward_camera(), k, 10.0);
  REQUIRE(m.occupied_count() == 1u);
  CHECK(m.cot[0] == doctest::Approx(0.7));
  CHECK(m.distance[0] == doctest::Approx(1.5 * std::sqrt(1.04)));

  const auto e = project_to_local_bev(ImageF(1, 5, 5, 0.0f), d2, forward_camera(), k, 0.1);
  CHECK(e.occupied_count() == 0u);
  CHECK_THROWS(project_to_local_bev(c2, d2, forward_camera(), k, 0.0));
  CHECK_THROWS(project_to_local_bev(ImageF(1, 4, 5), d2, forward_camera(), k, 0.1));
}

TEST_CASE("merge_into_global examples") {
  GlobalBevMap g({0, 0}, 1.0, 3, 3);
  merge_into_global(g, single({1, 1}, 1.0, 3.0));
  CHECK(g.cot(1, 1) == 1.0);
  CHECK(g.distance(1, 1) == 3.0);

  GlobalBevMap h({0, 0}, 1.0, 3, 3);
  merge_into_global(h, single({1, 1}, 1.5, 2.0));
  merge_into_global(h, single({1, 1}, 0.8, 3.0));
  CHECK(h.cot(1, 1) == 1.5);
  CHECK(h.distance(1, 1) == 2.0);

  GlobalBevMap u({0, 0}, 1.0, 3, 3);
  merge_into_global(u, single({2, 0}, 1.3, 5.0));
  merge_into_global(u, single({2, 0}, 0.7, 3.0));
  CHECK(u.cot(0, 2) == 0.7);
  CHECK(u.distance(0, 2) == 3.0);

  // Equal distance keeps the incumbent.
  merge_into_global(u, single({2, 0}, 1.9, 3.0));
  CHECK(u.cot(0, 2) == 0.7);

  CHECK(!u.known(2, 2));
  CHECK(u.cot(2, 2) == 0.0);

  CHECK_THROWS(merge_into_global(u, single({3, 0}, 1.0, 1.0)));
  CHECK_THROWS(merge_into_global(u, single({0.5, 0}, 1.0, 1.0)));
  CHECK_THROWS(merge_into_global(u, single({0, 0}, 1.0, 1.0, 0.5)));
  CHECK_THROWS(GlobalBevMap({0.05, 0}, 0.1, 2, 2));
}

TEST_CASE("query_cell and the edge rule") {
  GlobalBevMap g({0, 0}, 1.0, 4, 4);
  auto q = query_cell(g, {2.5, 1.5});
  CHECK(q.cot == 0.0);
  CHECK(q.distance == kNoDistance);
  merge_into_global(g, single({2, 1}, 1.2, 4.0));
  q = query_cell(g, {2.5, 1.5});
  CHECK(q.cot == 1.2);
  CHECK(q.distance == 4.0);
  // x = 2 lies on the shared edge of columns 1 and 2; it belongs to column 1.
  CHECK(query_cell(g, {2.0, 1.5}).col == 1);
  CHECK(query_cell(g, {1.5, 2.0}).row == 1);
  CHECK(bev_index(0.3, 0.0, 0.1) == 2);
  CHECK_THROWS(query_cell(g, {-0.5, 1.0}));
  CHECK_THROWS(query_cell(g, {4.5, 1.0}));
}

TEST_CASE("crop_to_extent keeps the overlapping part") {
  GlobalBevMap g({0, 0}, 1.0, 3, 3);
  LocalBevMap l;
  l.origin = {-1, -1};
  l.cell_size = 1.0;
  l.rows = l.cols = 3;
  l.cot.assign(9, 1.0);
  l.distance.assign(9, 2.0);
  const auto c = crop_to_extent(l, g);
  CHECK(c.rows == 2);
  CHECK(c.cols == 2);
  CHECK(c.origin == Vec2(0, 0));
  merge_into_global(g, c);
  CHECK(g.known(1, 1));
  CHECK(!g.known(2, 2));
  l.origin = {10, 10};
  CHECK(crop_to_extent(l, g).occupied_count() == 0u);
}

TEST_CASE("merge properties on randomized sequences") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const GlobalBevMap empty({-2.0, 1.0}, 0.5, 6, 7);
    std::vector<LocalBevMap> locals;
    const int n = 2 + int(rng() % 5);
    for (int i = 0; i < n; ++i) locals.push_back(oracle::random_local(rng, empty));

    GlobalBevMap g = empty;
    oracle::MergeLog log(empty.rows(), empty.cols());
    for (const auto& l : locals) {
      merge_into_global(g, l);
      log.add(empty, l);
    }
    for (int r = 0; r < g.rows(); ++r)
      for (int c = 0; c < g.cols(); ++c) {
        const auto [d, v] = log.expect(r, c);
        CHECK(g.distance(r, c) == d);
        CHECK(g.cot(r, c) == v);
      }

    std::vector<std::size_t> order(locals.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    GlobalBevMap p = empty;
    for (std::size_t i : order) merge_into_global(p, locals[i]);
    CHECK(p == g);

    GlobalBevMap twice = g;
    merge_into_global(twice, locals.back());
    CHECK(twice == g);
  }
}

TEST_CASE("global map file round trip") {
  GlobalBevMap g({-1.0, 2.0}, 0.5, 3, 4);
  merge_into_global(g, single({0, 2.5}, 1.25, 3.5, 0.5));
  const auto dir = std::filesystem::temp_directory_path() / "cotmap_bev_rt";
  std::filesystem::create_directories(dir);
  write_global_map(dir / "g.cott", dir / "g.json", g);
  const auto back = read_global_map(dir / "g.cott", dir / "g.json");
  CHECK(back == g);
  std::filesystem::remove_all(dir);
}
