#include "cotmap/pipeline.hpp"

#include "cotmap/augment.hpp"
#include "cotmap/colormap.hpp"
#include "cotmap/formats.hpp"
#include "cotmap/masks.hpp"
#include "cotmap/plan.hpp"
#include "cotmap/recon.hpp"
#include "cotmap/regress.hpp"
#include "cotmap/tensor_io.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace cotmap {

using Json = nlohmann::ordered_json;

namespace {

const fs::path& require(const fs::path& p) {
  if (!fs::exists(p)) throw MissingArtifact(p);
  return p;
}

void write_json(const fs::path& p, const Json& j) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << j.dump(2) << '\n';
}

Json read_json(const fs::path& p) {
  std::ifstream f(require(p));
  return Json::parse(f);
}

Json config_json(const RunConfig& cfg) { return Json::parse(dump_config(cfg)); }

std::string kf_name(int id, const char* suffix) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "kf_%04d%s.cott", id, suffix);
  return buf;
}

Exec exec_of(const RunConfig&) { return Exec::Parallel; }

int keyframe_count(const fs::path& dir) { return int(read_keyframe_poses(dir).size()); }

std::vector<int> training_ids(int n, int holdout_every) {
  std::vector<int> ids;
  for (int i = 0; i < n; ++i)
    if (!is_holdout(i, holdout_every)) ids.push_back(i);
  return ids;
}

void load_regressor(const fs::path& dir, LabelMode mode, PatchMlpRegressor& model, double& depth_scale) {
  const fs::path mdir = dir / "models" / to_string(mode);
  const Json m = read_json(mdir / "model.json");
  const auto& extra = m.at("extra");
  model = PatchMlpRegressor(extra.at("hidden").get<int>(), extra.at("feature_radius").get<int>(), 0,
                            PatchMlpRegressor::Init::Zero);
  depth_scale = extra.at("depth_scale").get<double>();
  load_params(require(mdir / "model.cott"), mdir / "model.json", model.params());
}

GlobalBevMap empty_global_map(const RunConfig& cfg, const TerrainGrid& world) {
  const double cs = cfg.map.cell_size;
  const int rows = cfg.map.rows > 0 ? cfg.map.rows : int(std::ceil(world.height_m() / cs - 1e-9));
  const int cols = cfg.map.cols > 0 ? cfg.map.cols : int(std::ceil(world.width_m() / cs - 1e-9));
  return GlobalBevMap(cfg.map.origin, cs, rows, cols);
}

Json path_json(const GlobalBevMap& map, const PathResult& r) {
  return {{"cells", r.cells.size()}, {"total_cost", r.total_cost}, {"total_distance", r.total_distance},
          {"start", {map.center(r.cells.front().row, r.cells.front().col).x(),
                     map.center(r.cells.front().row, r.cells.front().col).y()}}};
}

void write_path_csv(const fs::path& p, const GlobalBevMap& map, const PathResult& r) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << "x,y,cot\n";
  char buf[96];
  for (const auto& c : r.cells) {
    const Vec2 xy = map.center(c.row, c.col);
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", xy.x(), xy.y(), map.cot(c.row, c.col));
    f << buf;
  }
}

}  // namespace

bool is_holdout(int keyframe_id, int holdout_every) { return keyframe_id % holdout_every == holdout_every - 1; }

fs::path keyframe_file(const fs::path& dir, int id, const char* kind) {
  return dir / "keyframes" / kf_name(id, (std::string("_") + kind).c_str());
}

fs::path label_file(const fs::path& dir, LabelMode mode, int id) {
  return dir / "labels" / to_string(mode) / kf_name(id, "");
}

fs::path sl_label_file(const fs::path& dir, int id) { return label_file(dir, LabelMode::SL, id); }

void write_label(const fs::path& path, const CotLabelImage& label) {
  write_tensor(path, to_tensor(label.value));
  fs::path prov = path;
  prov.replace_filename(path.stem().string() + "_prov.cott");
  write_tensor(prov, to_tensor(label.provenance));
}

CotLabelImage read_label(const fs::path& path) {
  CotLabelImage l;
  l.value = image_f32(read_tensor(require(path)));
  fs::path prov = path;
  prov.replace_filename(path.stem().string() + "_prov.cott");
  l.provenance = image_u8(read_tensor(require(prov)));
  return l;
}

void write_world(const fs::path& dir, const TerrainGrid& world, const PowerModel& power, const RobotParams& robot,
                 double v_cmd, double nontraversable_cot) {
  Tensor t;
  t.dtype = DType::U8;
  t.dims = {std::uint32_t(world.nrows), std::uint32_t(world.ncols)};
  t.u8 = world.terrain;
  write_tensor(dir / "world_terrain.cott", t);
  Json obstacles = Json::array();
  for (const auto& b : world.obstacles)
    obstacles.push_back({{"min", {b.min.x(), b.min.y(), b.min.z()}},
                         {"max", {b.max.x(), b.max.y(), b.max.z()}},
                         {"color", {b.color[0], b.color[1], b.color[2]}}});
  Json terrains = Json::array();
  for (int id : world.terrain_ids_present())
    terrains.push_back({{"id", id},
                        {"name", terrain_catalog()[std::size_t(id)].name},
                        {"cot", terrain_cot(power, robot, id, v_cmd)}});
  write_json(dir / "world.json", {{"cell_size", world.cell_size},
                                  {"ncols", world.ncols},
                                  {"nrows", world.nrows},
                                  {"terrains", terrains},
                                  {"nontraversable_cot", nontraversable_cot},
                                  {"obstacles", obstacles}});
}

TerrainGrid read_world(const fs::path& dir) {
  const Json j = read_json(dir / "world.json");
  TerrainGrid w;
  w.cell_size = j.at("cell_size").get<double>();
  w.ncols = j.at("ncols").get<int>();
  w.nrows = j.at("nrows").get<int>();
  const Tensor t = read_tensor(require(dir / "world_terrain.cott"));
  if (t.dtype != DType::U8 || t.u8.size() != std::size_t(w.ncols) * std::size_t(w.nrows))
    throw std::runtime_error("world_terrain.cott does not match world.json");
  w.terrain = t.u8;
  for (const auto& o : j.at("obstacles")) {
    Box b;
    b.min = {o.at("min")[0].get<double>(), o.at("min")[1].get<double>(), o.at("min")[2].get<double>()};
    b.max = {o.at("max")[0].get<double>(), o.at("max")[1].get<double>(), o.at("max")[2].get<double>()};
    b.color = {o.at("color")[0].get<std::uint8_t>(), o.at("color")[1].get<std::uint8_t>(),
               o.at("color")[2].get<std::uint8_t>()};
    w.obstacles.push_back(b);
  }
  return w;
}

std::vector<Pose> read_keyframe_poses(const fs::path& dir) { return read_poses_csv(require(dir / "keyframes" / "poses.csv")); }

Keyframe read_keyframe(const fs::path& dir, int id) {
  const std::vector<Pose> poses = read_keyframe_poses(dir);
  if (id < 0 || std::size_t(id) >= poses.size()) throw std::out_of_range("keyframe id out of range");
  Keyframe kf;
  kf.id = id;
  kf.pose = poses[std::size_t(id)];
  kf.rgb = image_u8(read_tensor(require(keyframe_file(dir, id, "rgb"))));
  kf.depth = image_f32(read_tensor(require(keyframe_file(dir, id, "depth"))));
  const fs::path surf = keyframe_file(dir, id, "surface");
  if (fs::exists(surf)) kf.surface = image_u8(read_tensor(surf));
  return kf;
}

ImageF truth_cot_image(const ImageU8& surface, const PowerModel& power, const RobotParams& robot, double v,
                       double nontraversable_cot) {
  ImageF out(1, surface.height, surface.width, kUnknownCot);
  for (std::size_t i = 0; i < surface.data.size(); ++i) {
    const std::uint8_t s = surface.data[i];
    if (surface_is_obstacle(s)) out.data[i] = float(nontraversable_cot);
    else if (surface_is_terrain(s)) out.data[i] = float(terrain_cot(power, robot, surface_terrain_id(s), v));
  }
  return out;
}

void run_simulate(const RunConfig& cfg, const fs::path& dir) {
  cfg.validate();
  fs::create_directories(dir / "keyframes");
  const auto& sim = cfg.sim;
  WorldLayout layout = sim.world;
  layout.keepout_paths = {sim.waypoints};
  const TerrainGrid world = generate_world(stage_seed(cfg.seed, "world"), layout);
  const auto telemetry =
      simulate_drive(world, sim.power, sim.robot, sim.waypoints, sim.drive, stage_seed(cfg.seed, "drive"));
  std::vector<Pose> body;
  for (const auto& s : telemetry) body.push_back(s.pose);
  const auto picks = select_keyframes(body, sim.kf_trans, sim.kf_rot_deg);
  const Pose mount = camera_mount(sim.mount_height, sim.pitch_deg * std::numbers::pi / 180.0);
  std::vector<Pose> cams;
  for (std::size_t i : picks) cams.push_back(body[i] * mount);
  const auto keyframes =
      render_synthetic_keyframes(world, cams, sim.camera, stage_seed(cfg.seed, "render"), sim.render, exec_of(cfg));
  const PointCloud cloud = build_point_cloud(keyframes, sim.camera, sim.cloud_stride);

  write_world(dir, world, sim.power, sim.robot, sim.drive.v_cmd, cfg.label.cot.nontraversable_cot);
  write_telemetry_jsonl(dir / "telemetry.jsonl", telemetry);
  write_poses_csv(dir / "poses.csv", body);
  write_poses_csv(dir / "keyframes" / "poses.csv", cams);
  write_ply(dir / "cloud.ply", cloud);
  for (const auto& kf : keyframes) {
    write_tensor(keyframe_file(dir, kf.id, "rgb"), to_tensor(kf.rgb));
    write_tensor(keyframe_file(dir, kf.id, "depth"), to_tensor(kf.depth));
    write_tensor(keyframe_file(dir, kf.id, "surface"), to_tensor(kf.surface));
    write_tensor(keyframe_file(dir, kf.id, "truth"),
                 to_tensor(truth_cot_image(kf.surface, sim.power, sim.robot, sim.drive.v_cmd,
                                           cfg.label.cot.nontraversable_cot)));
  }
  std::vector<int> ids = world.terrain_ids_present();
  write_json(dir / "simulate.json", {{"samples", telemetry.size()},
                                     {"keyframes", keyframes.size()},
                                     {"cloud_points", cloud.size()},
                                     {"terrain_ids", ids},
                                     {"obstacles", world.obstacles.size()},
                                     {"config", config_json(cfg)}});
  spdlog::info("simulate: {} samples, {} keyframes, {} cloud points, {} obstacles", telemetry.size(),
               keyframes.size(), cloud.size(), world.obstacles.size());
}

void run_label(const RunConfig& cfg, const fs::path& dir) {
  cfg.validate();
  const auto telemetry = read_telemetry_jsonl(require(dir / "telemetry.jsonl"));
  const CotParams cot = cfg.cot();
  const CotSeries series = compute_cot_series(telemetry, cot);
  write_series_csv(dir / "cot_series.csv", series);
  std::vector<Pose> body;
  for (const auto& s : telemetry) body.push_back(s.pose);
  const TrajectoryMesh mesh = build_trajectory_mesh(body, series, cfg.sim.robot.width);
  const PointCloud cloud = read_ply(require(dir / "cloud.ply"));
  const PointCloud overhead = extract_overhead_points(cloud, body, cfg.label.overhead, std::nullopt, exec_of(cfg));

  const int n = keyframe_count(dir);
  std::vector<Keyframe> kfs;
  for (int i = 0; i < n; ++i) kfs.push_back(read_keyframe(dir, i));
  LabelParams lp = cfg.label;
  lp.cot = cot;
  const auto labels = compose_label_images(kfs, mesh, overhead, cloud, cfg.sim.camera, lp, exec_of(cfg));
  fs::create_directories(dir / "labels" / "sl");
  for (int i = 0; i < n; ++i) write_label(sl_label_file(dir, i), labels[std::size_t(i)]);
  const double cov = coverage(labels);
  write_json(dir / "label.json", {{"keyframes", n},
                                  {"overhead_points", overhead.size()},
                                  {"mesh_triangles", mesh.triangles.size()},
                                  {"coverage_sl", cov},
                                  {"config", config_json(cfg)}});
  spdlog::info("label: {} keyframes, {} overhead points, SL coverage {:.2f}%", n, overhead.size(), 100.0 * cov);
}

void run_augment(const RunConfig& cfg, const fs::path& dir) {
  cfg.validate();
  const CotParams cot = cfg.cot();
  const int n = keyframe_count(dir);
  std::unique_ptr<MaskProvider> provider;
  if (cfg.augment.masks == "oracle") provider = std::make_unique<OracleMaskProvider>(cfg.augment.min_mask_pixels);
  else provider = std::make_unique<FileMaskProvider>(cfg.augment.masks);

  fs::create_directories(dir / "masks");
  fs::create_directories(dir / "augment");
  for (auto m : {LabelMode::SL_SAM, LabelMode::UN_SAM, LabelMode::C_SAM})
    fs::create_directories(dir / "labels" / to_string(m));

  std::vector<Keyframe> kfs;
  std::vector<MaskSet> masks;
  std::vector<CotLabelImage> sl, ext;
  ExtendReport total;
  for (int i = 0; i < n; ++i) {
    kfs.push_back(read_keyframe(dir, i));
    masks.push_back(provider->masks_for(kfs.back()));
    write_tensor(FileMaskProvider::path_for(dir / "masks", i), to_tensor(masks.back().masks));
    sl.push_back(read_label(sl_label_file(dir, i)));
    ExtendReport rep;
    ext.push_back(extend_labels_by_masks(sl.back(), masks.back(), cot, &rep));
    total.masks_path += rep.masks_path;
    total.masks_overhead += rep.masks_overhead;
    total.masks_conflict += rep.masks_conflict;
    write_label(label_file(dir, LabelMode::SL_SAM, i), ext.back());
  }
  if (total.masks_conflict > 0)
    spdlog::warn("augment: {} masks touched both path and overhead labels; marked non-traversable",
                 total.masks_conflict);

  // Reconstruction model on the training split.
  std::vector<ReconSample> samples;
  for (int i : training_ids(n, cfg.holdout_every)) {
    ReconSample s;
    s.input = recon_input(kfs[std::size_t(i)], cfg.augment.depth_scale);
    s.traversable = traversable_pixels(ext[std::size_t(i)], cot);
    s.masks = MaskSet(kfs[std::size_t(i)].rgb.height, kfs[std::size_t(i)].rgb.width);
    const MaskSet& ms = masks[std::size_t(i)];
    for (int m = 0; m < ms.count(); ++m)
      if (mask_label_state(ext[std::size_t(i)], ms, m, cot) == MaskLabelState::Traversable) {
        const auto plane = ms.masks.channel(m);
        s.masks.add({plane.begin(), plane.end()}, ms.source[std::size_t(m)]);
      }
    samples.push_back(std::move(s));
  }
  const auto trained =
      train_reconstruction_model(samples, cfg.augment.recon, stage_seed(cfg.seed, "recon"), exec_of(cfg));
  save_params(dir / "augment" / "recon.cott", dir / "augment" / "recon.json", trained.model.params(),
              Json({{"c1", cfg.augment.recon.c1}, {"c2", cfg.augment.recon.c2}}).dump());
  {
    std::ofstream f(dir / "augment" / "recon_loss.csv");
    f << "epoch,main,aux\n";
    for (std::size_t e = 0; e < trained.epoch_main.size(); ++e)
      f << e << ',' << Json(trained.epoch_main[e]).dump() << ',' << Json(trained.epoch_aux[e]).dump() << '\n';
  }

  std::vector<std::vector<double>> se(static_cast<std::size_t>(n));
  std::vector<std::vector<MaskLabelState>> states(static_cast<std::size_t>(n));
  std::vector<double> labeled, unlabeled;
  for (int i = 0; i < n; ++i) {
    const auto act = trained.model.forward(recon_input(kfs[std::size_t(i)], cfg.augment.depth_scale), exec_of(cfg));
    se[std::size_t(i)] = mask_squared_errors(act, masks[std::size_t(i)], cfg.augment.recon.loss);
    for (int m = 0; m < masks[std::size_t(i)].count(); ++m) {
      const auto st = mask_label_state(ext[std::size_t(i)], masks[std::size_t(i)], m, cot);
      states[std::size_t(i)].push_back(st);
      const double v = se[std::size_t(i)][std::size_t(m)];
      if (std::isnan(v)) continue;
      if (st == MaskLabelState::Traversable && !is_holdout(i, cfg.holdout_every)) labeled.push_back(v);
      else if (st == MaskLabelState::Unlabeled) unlabeled.push_back(v);
    }
  }
  const DecisionBoundary boundary = select_decision_boundary(labeled, unlabeled, cfg.augment.boundary);

  std::vector<CotLabelImage> csam(static_cast<std::size_t>(n)), unsam(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    csam[std::size_t(i)] =
        label_nontraversable_by_confidence(ext[std::size_t(i)], masks[std::size_t(i)], se[std::size_t(i)], boundary, cot);
    unsam[std::size_t(i)] = fill_unknown_nontraversable(ext[std::size_t(i)], cot);
    write_label(label_file(dir, LabelMode::C_SAM, i), csam[std::size_t(i)]);
    write_label(label_file(dir, LabelMode::UN_SAM, i), unsam[std::size_t(i)]);
  }
  {
    std::ofstream f(dir / "augment" / "se.csv");
    f << "keyframe,mask,surface,state,pixels,se,holdout\n";
    const char* names[] = {"unlabeled", "traversable", "nontraversable"};
    for (int i = 0; i < n; ++i)
      for (int m = 0; m < masks[std::size_t(i)].count(); ++m)
        f << i << ',' << m << ',' << masks[std::size_t(i)].source[std::size_t(m)] << ','
          << names[int(states[std::size_t(i)][std::size_t(m)])] << ',' << masks[std::size_t(i)].pixel_count(m) << ','
          << Json(se[std::size_t(i)][std::size_t(m)]).dump() << ',' << is_holdout(i, cfg.holdout_every) << '\n';
  }
  const double c_sl = coverage(sl), c_ext = coverage(ext), c_c = coverage(csam), c_un = coverage(unsam);
  {
    std::ofstream f(dir / "coverage.csv");
    f << "stage,coverage\n";
    f << "sl," << Json(c_sl).dump() << "\nsl-sam," << Json(c_ext).dump() << "\nc-sam," << Json(c_c).dump()
      << "\nun-sam," << Json(c_un).dump() << '\n';
  }
  write_json(dir / "augment.json", {{"theta", boundary.theta},
                                    {"labeled_masks", labeled.size()},
                                    {"unlabeled_masks", unlabeled.size()},
                                    {"masks_path", total.masks_path},
                                    {"masks_overhead", total.masks_overhead},
                                    {"masks_conflict", total.masks_conflict},
                                    {"recon_main_initial", trained.epoch_main.front()},
                                    {"recon_main_final", trained.epoch_main.back()},
                                    {"coverage", {{"sl", c_sl}, {"sl-sam", c_ext}, {"c-sam", c_c}, {"un-sam", c_un}}},
                                    {"config", config_json(cfg)}});
  spdlog::info("augment: coverage SL {:.2f}% SL-SAM {:.2f}% C-SAM {:.2f}% UN-SAM {:.2f}%, theta {:.4g}",
               100 * c_sl, 100 * c_ext, 100 * c_c, 100 * c_un, boundary.theta);
}

std::vector<CoverageRow> read_coverage(const fs::path& dir) {
  std::ifstream f(require(dir / "coverage.csv"));
  std::string line;
  std::getline(f, line);
  std::vector<CoverageRow> rows;
  while (std::getline(f, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    rows.push_back({line.substr(0, comma), std::stod(line.substr(comma + 1))});
  }
  return rows;
}

void run_train(const RunConfig& cfg, const fs::path& dir) {
  cfg.validate();
  const int n = keyframe_count(dir);
  std::vector<RegressSample> data;
  for (int i : training_ids(n, cfg.holdout_every)) {
    RegressSample s;
    s.input = recon_input(read_keyframe(dir, i), cfg.augment.depth_scale);
    s.label = read_label(label_file(dir, cfg.mode, i)).value;
    s.masks.masks = image_u8(read_tensor(require(FileMaskProvider::path_for(dir / "masks", i))));
    s.masks.source.assign(std::size_t(s.masks.count()), -1);
    data.push_back(std::move(s));
  }
  RegressorConfig rc = cfg.regress;
  rc.seed = stage_seed(cfg.seed, "regress");
  const auto res = train_regressor(data, cfg.mode, rc, exec_of(cfg));
  const fs::path mdir = dir / "models" / to_string(cfg.mode);
  fs::create_directories(mdir);
  save_params(mdir / "model.cott", mdir / "model.json", res.model.params(),
              Json({{"mode", to_string(cfg.mode)},
                    {"hidden", rc.hidden},
                    {"feature_radius", rc.feature_radius},
                    {"depth_scale", cfg.augment.depth_scale},
                    {"config", config_json(cfg)}})
                  .dump());
  std::ofstream f(mdir / "loss.csv");
  f << "epoch,loss\n";
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) f << e + 1 << ',' << Json(res.epoch_loss[e]).dump() << '\n';
  spdlog::info("train[{}]: {} images, final loss {:.5f}", to_string(cfg.mode), data.size(),
               res.epoch_loss.empty() ? 0.0 : res.epoch_loss.back());
}

void run_predict(const RunConfig& cfg, const fs::path& dir) {
  cfg.validate();
  PatchMlpRegressor model;
  double depth_scale = 1.0;
  load_regressor(dir, cfg.mode, model, depth_scale);
  const int n = keyframe_count(dir);
  const fs::path pdir = dir / "pred" / to_string(cfg.mode);
  fs::create_directories(pdir);
  for (int i = 0; i < n; ++i) {
    const Keyframe kf = read_keyframe(dir, i);
    if (kf.rgb.height != cfg.sim.camera.height || kf.rgb.width != cfg.sim.camera.width)
      throw std::invalid_argument("predict: keyframe size does not match the configured camera");
    write_tensor(pdir / kf_name(i, ""), to_tensor(predict_cot_image(model, recon_input(kf, depth_scale), exec_of(cfg))));
  }
  spdlog::info("predict[{}]: {} keyframes", to_string(cfg.mode), n);
}

void run_map(const RunConfig& cfg, const fs::path& dir) {
  cfg.validate();
  const TerrainGrid world = read_world(dir);
  GlobalBevMap global = empty_global_map(cfg, world);
  const int n = keyframe_count(dir);
  // Companion map of the surface id behind each winning observation; the same
  // depth and validity inputs give the same winners, so it is used for evaluation.
  GlobalBevMap source = global;
  const fs::path pdir = dir / "pred" / to_string(cfg.mode);
  for (int i = 0; i < n; ++i) {
    const Keyframe kf = read_keyframe(dir, i);
    const ImageF pred = image_f32(read_tensor(require(pdir / kf_name(i, ""))));
    const LocalBevMap local = project_to_local_bev(pred, kf.depth, kf.pose, cfg.sim.camera, cfg.map.cell_size);
    merge_into_global(global, crop_to_extent(local, global));
    ImageF ids(1, pred.height, pred.width, 0.0f);
    for (std::size_t p = 0; p < ids.data.size(); ++p)
      if (pred.data[p] > 0.0f) ids.data[p] = float(kf.surface.data[p]) + 1.0f;
    merge_into_global(source, crop_to_extent(
                                  project_to_local_bev(ids, kf.depth, kf.pose, cfg.sim.camera, cfg.map.cell_size), source));
  }
  const fs::path mdir = dir / "map" / to_string(cfg.mode);
  fs::create_directories(mdir);
  write_global_map(mdir / "global.cott", mdir / "global.json", global);
  write_global_map(mdir / "source.cott", mdir / "source.json", source);
  write_ppm(mdir / "global.ppm", colorize_map(global, cfg.label.cot.nontraversable_cot));
  std::size_t known = 0;
  for (int r = 0; r < global.rows(); ++r)
    for (int c = 0; c < global.cols(); ++c) known += global.known(r, c);
  spdlog::info("map[{}]: {}x{} cells, {} observed", to_string(cfg.mode), global.rows(), global.cols(), known);
}

void run_plan(const RunConfig& cfg, const fs::path& dir) {
  cfg.validate();
  const fs::path mdir = dir / "map" / to_string(cfg.mode);
  const GlobalBevMap map = read_global_map(require(mdir / "global.cott"), mdir / "global.json");
  PlanProblem p;
  p.map = &map;
  p.start = cfg.plan.start;
  p.goal = cfg.plan.goal;
  p.unknown = cfg.plan.unknown;
  p.connectivity = cfg.plan.connectivity;
  p.hard_forbid = cfg.plan.hard_forbid;
  const PathResult best = astar_plan(p);
  const PathResult alt = shortest_distance_plan(p);
  const fs::path out = dir / "plan" / to_string(cfg.mode);
  fs::create_directories(out);
  write_path_csv(out / "path.csv", map, best);
  write_path_csv(out / "shortest.csv", map, alt);
  ImageU8 img = colorize_map(map, cfg.label.cot.nontraversable_cot);
  overlay_path(img, map, alt.cells, {255, 220, 0});
  overlay_path(img, map, best.cells, {220, 0, 0});
  write_ppm(out / "overlay.ppm", img);
  write_json(out / "summary.json", {{"optimal", path_json(map, best)},
                                    {"shortest", path_json(map, alt)},
                                    {"config", config_json(cfg)}});
  spdlog::info("plan[{}]: cost {:.3f} over {:.2f} m (shortest route: cost {:.3f} over {:.2f} m)", to_string(cfg.mode),
               best.total_cost, best.total_distance, alt.total_cost, alt.total_distance);
}

std::vector<int> traversed_terrains(const fs::path& dir, const TerrainGrid& world) {
  std::set<int> ids;
  for (const auto& s : read_telemetry_jsonl(require(dir / "telemetry.jsonl")))
    ids.insert(world.terrain_at(s.pose.translation.x(), s.pose.translation.y()));
  return {ids.begin(), ids.end()};
}

MapEvaluation evaluate_map(const GlobalBevMap& map, const GlobalBevMap& source, const TerrainGrid& world,
                           const std::vector<int>& traversed, const PowerModel& power, const RobotParams& robot,
                           double v, double nontraversable_cot, double tol, double margin) {
  const int rows = map.rows(), cols = map.cols();
  if (source.rows() != rows || source.cols() != cols) throw std::invalid_argument("evaluate_map: map shapes differ");
  auto surface = [&](int r, int c) { return source.known(r, c) ? int(std::lround(source.cot(r, c))) - 1 : -1; };
  // True when the disc of radius `margin` around p is off all obstacle footprints and,
  // sampled at half the world cell size, lies on terrain t.
  const double step = 0.5 * world.cell_size;
  const int reach = int(std::ceil(margin / step));
  auto interior = [&](const Vec2& p, int t) {
    for (const Box& b : world.obstacles) {
      const double dx = std::max({b.min.x() - p.x(), 0.0, p.x() - b.max.x()});
      const double dy = std::max({b.min.y() - p.y(), 0.0, p.y() - b.max.y()});
      if (std::hypot(dx, dy) < margin) return false;
    }
    for (int i = -reach; i <= reach; ++i)
      for (int j = -reach; j <= reach; ++j) {
        if (std::hypot(i * step, j * step) > margin) continue;
        const double qx = p.x() + i * step, qy = p.y() + j * step;
        if (qx < 0.0 || qy < 0.0 || qx >= world.width_m() || qy >= world.height_m()) continue;
        if (world.terrain_at(qx, qy) != t) return false;
      }
    return true;
  };
  MapEvaluation ev;
  std::map<int, std::pair<double, std::size_t>> acc;
  double obs_sum = 0.0;
  std::size_t obs_ok = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int s = surface(r, c);
      if (s < 0 || !map.known(r, c)) continue;
      const auto sid = std::uint8_t(s);
      if (surface_is_obstacle(sid)) {
        ++ev.obstacle_cells;
        obs_sum += map.cot(r, c);
        obs_ok += std::abs(map.cot(r, c) - nontraversable_cot) <= tol * nontraversable_cot;
      } else if (surface_is_terrain(sid) && interior(map.center(r, c), surface_terrain_id(sid))) {
        auto& a = acc[surface_terrain_id(sid)];
        a.first += map.cot(r, c);
        ++a.second;
      }
    }
  for (int t : traversed) {
    TerrainRecovery tr;
    tr.terrain = t;
    tr.name = terrain_catalog()[std::size_t(t)].name;
    tr.truth = terrain_cot(power, robot, t, v);
    const auto it = acc.find(t);
    tr.cells = it == acc.end() ? 0 : it->second.second;
    tr.map_mean = tr.cells ? it->second.first / double(tr.cells) : 0.0;
    tr.rel_error = tr.cells ? std::abs(tr.map_mean - tr.truth) / tr.truth : 1.0;
    ev.terrains.push_back(tr);
  }
  if (ev.obstacle_cells) {
    ev.obstacle_mean = obs_sum / double(ev.obstacle_cells);
    ev.obstacle_within_tol = double(obs_ok) / double(ev.obstacle_cells);
  }
  return ev;
}

void run_eval(const RunConfig& cfg, const fs::path& dir) {
  cfg.validate();
  const int n = keyframe_count(dir);
  const fs::path pdir = dir / "pred" / to_string(cfg.mode);
  double se_truth = 0.0, se_label = 0.0;
  std::size_t n_truth = 0, n_label = 0, frames = 0;
  for (int i = 0; i < n; ++i) {
    if (!is_holdout(i, cfg.holdout_every)) continue;
    ++frames;
    const ImageF pred = image_f32(read_tensor(require(pdir / kf_name(i, ""))));
    const ImageF truth = image_f32(read_tensor(require(keyframe_file(dir, i, "truth"))));
    const ImageF label = read_label(label_file(dir, cfg.mode, i)).value;
    for (std::size_t p = 0; p < pred.data.size(); ++p) {
      if (truth.data[p] != kUnknownCot) {
        se_truth += std::pow(double(pred.data[p]) - truth.data[p], 2);
        ++n_truth;
      }
      if (label.data[p] != kUnknownCot) {
        se_label += std::pow(double(pred.data[p]) - label.data[p], 2);
        ++n_label;
      }
    }
  }
  Json j;
  j["mode"] = to_string(cfg.mode);
  j["heldout_frames"] = frames;
  j["mse_truth"] = n_truth ? se_truth / double(n_truth) : 0.0;
  j["mse_labels"] = n_label ? se_label / double(n_label) : 0.0;

  const fs::path mdir = dir / "map" / to_string(cfg.mode);
  if (fs::exists(mdir / "global.cott") && fs::exists(mdir / "source.cott")) {
    const GlobalBevMap map = read_global_map(mdir / "global.cott", mdir / "global.json");
    const GlobalBevMap source = read_global_map(mdir / "source.cott", mdir / "source.json");
    const TerrainGrid world = read_world(dir);
    const auto ev = evaluate_map(map, source, world, traversed_terrains(dir, world), cfg.sim.power, cfg.sim.robot,
                                 cfg.sim.drive.v_cmd, cfg.label.cot.nontraversable_cot, 0.05);
    Json terr = Json::array();
    for (const auto& t : ev.terrains)
      terr.push_back({{"terrain", t.name}, {"truth", t.truth}, {"map_mean", t.map_mean}, {"rel_error", t.rel_error},
                      {"cells", t.cells}});
    j["terrain_recovery"] = terr;
    j["obstacle_cells"] = ev.obstacle_cells;
    j["obstacle_mean"] = ev.obstacle_mean;
    j["obstacle_within_5pct"] = ev.obstacle_within_tol;
  }
  j["config"] = config_json(cfg);
  const fs::path out = dir / "eval" / to_string(cfg.mode);
  fs::create_directories(out);
  write_json(out / "eval.json", j);
  spdlog::info("eval[{}]: held-out MSE vs truth {:.4f}, vs labels {:.4f}", to_string(cfg.mode),
               j["mse_truth"].get<double>(), j["mse_labels"].get<double>());
}

void run_all(const RunConfig& cfg, const fs::path& dir) {
  run_simulate(cfg, dir);
  run_label(cfg, dir);
  run_augment(cfg, dir);
  run_train(cfg, dir);
  run_predict(cfg, dir);
  run_map(cfg, dir);
  run_plan(cfg, dir);
  run_eval(cfg, dir);
}

}  // namespace cotmap
