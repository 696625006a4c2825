#include "cotmap/config.hpp"
#include "cotmap/formats.hpp"
#include "cotmap/tensor_io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace cotmap;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const char* name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("tensor encode and decode") {
  ImageF img(2, 3, 4);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = float(i) * 0.25f - 1.0f;
  const Tensor t = to_tensor(img);
  const auto bytes = encode_tensor(t);
  REQUIRE(bytes.size() == 4u + 3u + 3u * 4u + 24u * 4u);
  CHECK(bytes[0] == 'C');
  CHECK(bytes[3] == 'T');
  CHECK(bytes[4] == 1);
  CHECK(bytes[6] == 3);
  CHECK(bytes[7] == 2);  // little-endian first dim
  CHECK(decode_tensor(bytes) == t);
  CHECK(image_f32(decode_tensor(bytes)) == img);

  ImageU8 u(1, 2, 5, 9);
  const Tensor tu = to_tensor(u);
  CHECK(image_u8(decode_tensor(encode_tensor(tu))) == u);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_tensor(bad), TensorFormatError);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_tensor(truncated), TensorFormatError);
  auto version = bytes;
  version[4] = 2;
  CHECK_THROWS_AS(decode_tensor(version), TensorFormatError);

  const auto dir = scratch("cotmap_io_tensor");
  write_tensor(dir / "a.cott", t);
  CHECK(read_tensor(dir / "a.cott") == t);
  CHECK_THROWS(read_tensor(dir / "missing.cott"));
  fs::remove_all(dir);
}

TEST_CASE("config parsing") {
  const RunConfig def;
  const RunConfig back = parse_config(dump_config(def));
  CHECK(dump_config(back) == dump_config(def));

  const auto c = parse_config(R"({"seed": 3, "mode": "sl", "regress": {"epochs": 2}})");
  CHECK(c.seed == 3u);
  CHECK(c.mode == LabelMode::SL);
  CHECK(c.regress.epochs == 2);

  try {
    parse_config(R"({"regress": {"epochz": 2}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("regress.epochz") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(R"({"mode": "sam"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"world": {"strips": ["lava"]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);

  RunConfig odd;
  odd.sim.camera.width = 90;
  CHECK_THROWS_AS(odd.validate(), ConfigError);

  for (const char* name : {"world_a.json", "world_b.json"})
    CHECK_NOTHROW(load_config(fs::path(COTMAP_SOURCE_DIR) / "configs" / name).validate());
}

TEST_CASE("stage seeds") {
  CHECK(stage_seed(7, "simulate") == stage_seed(7, "simulate"));
  CHECK(stage_seed(7, "simulate") != stage_seed(7, "train"));
  CHECK(stage_seed(7, "train") != stage_seed(8, "train"));
}

TEST_CASE("text and image formats round trip") {
  const auto dir = scratch("cotmap_io_formats");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-5, 5);

  std::vector<TelemetrySample> tel(7);
  for (std::size_t i = 0; i < tel.size(); ++i) {
    tel[i].t = 0.1 * double(i);
    tel[i].pose = Pose::from_xyz_yaw(U(rng), U(rng), 0.0, U(rng));
    tel[i].v = 1.0;
    tel[i].current = 2.5 + U(rng);
  }
  write_telemetry_jsonl(dir / "t.jsonl", tel);
  const auto tel2 = read_telemetry_jsonl(dir / "t.jsonl");
  REQUIRE(tel2.size() == tel.size());
  for (std::size_t i = 0; i < tel.size(); ++i) {
    CHECK(tel2[i].t == tel[i].t);
    CHECK(tel2[i].current == tel[i].current);
    CHECK(tel2[i].pose.translation == tel[i].pose.translation);
  }

  std::vector<Pose> poses;
  for (const auto& s : tel) poses.push_back(s.pose);
  write_poses_csv(dir / "p.csv", poses);
  const auto poses2 = read_poses_csv(dir / "p.csv");
  REQUIRE(poses2.size() == poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    CHECK(poses2[i].translation == poses[i].translation);
    CHECK(poses2[i].rotation.coeffs() == poses[i].rotation.coeffs());
  }

  PointCloud pts;
  for (int i = 0; i < 20; ++i) pts.emplace_back(U(rng), U(rng), U(rng));
  write_ply(dir / "c.ply", pts);
  CHECK(read_ply(dir / "c.ply") == pts);

  ImageU8 rgb(3, 4, 5);
  for (auto& v : rgb.data) v = std::uint8_t(rng() % 256);
  write_ppm(dir / "i.ppm", rgb);
  CHECK(read_ppm(dir / "i.ppm") == rgb);

  std::ofstream(dir / "bad.ply") << "ply\nformat binary_little_endian 1.0\nend_header\n";
  CHECK_THROWS_AS(read_ply(dir / "bad.ply"), FormatError);
  std::ofstream(dir / "bad.jsonl") << "{\"t\": 0}\n";
  CHECK_THROWS(read_telemetry_jsonl(dir / "bad.jsonl"));
  fs::remove_all(dir);
}
