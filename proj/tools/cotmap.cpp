// Command-line driver for the COT mapping pipeline.
//
//   cotmap <stage> [--config PATH] [--seed N] [--out DIR] [--mode MODE] [--jobs N]
//
// Exit codes: 0 success, 2 validation error, 1 anything else.

#include "cotmap/config.hpp"
#include "cotmap/parallel.hpp"
#include "cotmap/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitFailure = 1;

struct SharedFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  std::string mode;
  int jobs = 0;
};

void add_shared(CLI::App* cmd, SharedFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "root seed (overrides the config)");
  cmd->add_option("--out", f.out, "dataset directory")->capture_default_str();
  cmd->add_option("--mode", f.mode, "label mode")->check(CLI::IsMember({"sl", "sl-sam", "un-sam", "c-sam"}));
  cmd->add_option("--jobs", f.jobs, "worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
}

cotmap::RunConfig resolve(const SharedFlags& f) {
  cotmap::RunConfig cfg = f.config.empty() ? cotmap::RunConfig{} : cotmap::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.mode.empty()) cfg.mode = *cotmap::parse_label_mode(f.mode);
  if (f.jobs > 0) cfg.jobs = f.jobs;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost-of-transport mapping pipeline"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  using Stage = std::function<void(const cotmap::RunConfig&, const std::filesystem::path&)>;
  const std::map<std::string, std::pair<const char*, Stage>> stages = {
      {"simulate", {"generate a synthetic world, drive and keyframes", cotmap::run_simulate}},
      {"label", {"project trajectory COT into keyframe labels", cotmap::run_label}},
      {"augment", {"extend labels with masks and reconstruction confidence", cotmap::run_augment}},
      {"train", {"train the COT regressor for --mode", cotmap::run_train}},
      {"predict", {"predict COT images for every keyframe", cotmap::run_predict}},
      {"map", {"merge predictions into the global BEV map", cotmap::run_map}},
      {"plan", {"plan an energy-optimal path on the map", cotmap::run_plan}},
      {"eval", {"report held-out MSE and COT recovery", cotmap::run_eval}},
      {"all", {"run every stage in order", cotmap::run_all}},
  };
  SharedFlags flags;
  for (const auto& [name, entry] : stages) add_shared(app.add_subcommand(name, entry.first), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    const cotmap::RunConfig cfg = resolve(flags);
    cotmap::set_thread_count(cfg.jobs);
    const std::string name = app.get_subcommands().front()->get_name();
    stages.at(name).second(cfg, flags.out);
  } catch (const cotmap::ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return 0;
}
