#include "cotmap/config.hpp"
#include "cotmap/pipeline.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* kSmallWorld = R"({
  "seed": 5,
  "mode": "c-sam",
  "world": {"ncols": 80, "nrows": 120, "strips": ["road", "grass"], "random_obstacles": 2, "path_obstacles": 1},
  "route": {"waypoints": [[2, 1], [2, 10], [6, 10], [6, 1]]},
  "augment": {"optimizer": "adamw", "lr": 0.005, "epochs": 2},
  "regress": {"lr": 0.005, "epochs": 2, "hidden": 8},
  "plan": {"start": [2, 1.5], "goal": [6, 1.5]}
})";

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).generic_string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

}  // namespace

TEST_CASE("a small pipeline run is byte-reproducible") {
  const auto cfg = cotmap::parse_config(kSmallWorld);
  cfg.validate();
  const auto base = fs::temp_directory_path() / "cotmap_determinism";
  fs::remove_all(base);
  cotmap::run_all(cfg, base / "a");
  cotmap::run_all(cfg, base / "b");
  const auto a = snapshot(base / "a"), b = snapshot(base / "b");
  CHECK(a.size() > 20u);
  REQUIRE(a.size() == b.size());
  for (const auto& [name, bytes] : a) {
    INFO(name);
    REQUIRE(b.count(name) == 1u);
    CHECK(b.at(name) == bytes);
  }
  CHECK(a.count("eval/c-sam/eval.json") == 1u);
  fs::remove_all(base);
}
