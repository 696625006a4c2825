// Serial reference vs OpenMP for the data-parallel kernels.

#include "cotmap/cotlabel.hpp"
#include "cotmap/nn.hpp"
#include "cotmap/regress.hpp"
#include "cotmap/render.hpp"
#include "cotmap/simworld.hpp"

#include <benchmark/benchmark.h>

#include <numbers>

namespace {

using namespace cotmap;

Exec exec_arg(const benchmark::State& st) { return st.range(0) ? Exec::Parallel : Exec::Serial; }

struct Scene {
  TerrainGrid world;
  std::vector<Pose> body;
  std::vector<Pose> cams;
  std::vector<Keyframe> keyframes;
  PointCloud cloud;
  TrajectoryMesh mesh;
};

const Scene& scene() {
  static const Scene s = [] {
    Scene sc;
    WorldLayout layout;
    layout.random_obstacles = 8;
    const std::vector<Vec2> route{{6, 2}, {6, 38}, {18, 38}, {18, 2}};
    layout.keepout_paths = {route};
    sc.world = generate_world(1, layout);
    const auto tel = simulate_drive(sc.world, default_power_model(), RobotParams{}, route, DriveOptions{}, 1);
    for (const auto& t : tel) sc.body.push_back(t.pose);
    const Pose mount = camera_mount(0.5, 20.0 * std::numbers::pi / 180.0);
    for (std::size_t i = 0; i < sc.body.size(); i += 10) sc.cams.push_back(sc.body[i] * mount);
    sc.keyframes = render_synthetic_keyframes(sc.world, sc.cams, CameraIntrinsics{}, 1);
    sc.cloud = build_point_cloud(sc.keyframes, CameraIntrinsics{}, 4);
    sc.mesh = build_trajectory_mesh(sc.body, compute_cot_series(tel, CotParams{}), 0.5);
    return sc;
  }();
  return s;
}

void BM_RenderKeyframes(benchmark::State& st) {
  const auto& sc = scene();
  for (auto _ : st)
    benchmark::DoNotOptimize(render_synthetic_keyframes(sc.world, sc.cams, CameraIntrinsics{}, 1, {}, exec_arg(st)));
}

void BM_ComposeLabels(benchmark::State& st) {
  const auto& sc = scene();
  for (auto _ : st)
    benchmark::DoNotOptimize(
        compose_label_images(sc.keyframes, sc.mesh, {}, sc.cloud, CameraIntrinsics{}, LabelParams{}, exec_arg(st)));
}

void BM_OverheadExtraction(benchmark::State& st) {
  const auto& sc = scene();
  for (auto _ : st)
    benchmark::DoNotOptimize(extract_overhead_points(sc.cloud, sc.body, OverheadRegion{}, std::nullopt, exec_arg(st)));
}

void BM_Features(benchmark::State& st) {
  const auto& sc = scene();
  Field in(4, 64, 96);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 96; ++x) in.at(c, y, x) = sc.keyframes[0].rgb.at(c, y, x) / 255.0;
  for (auto _ : st) benchmark::DoNotOptimize(compute_features(in, 2, exec_arg(st)));
}

void BM_Conv2x2(benchmark::State& st) {
  Field in(16, 32, 48, 0.5), out;
  std::vector<double> w(32 * 16 * 4, 0.01), b(32, 0.0);
  for (auto _ : st) {
    conv2x2_forward(in, w.data(), b.data(), 32, out, exec_arg(st));
    benchmark::DoNotOptimize(out.data.data());
  }
}

}  // namespace

BENCHMARK(BM_RenderKeyframes)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ComposeLabels)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OverheadExtraction)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Features)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Conv2x2)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
