#include "cotmap/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace cotmap {

using Json = nlohmann::ordered_json;

namespace {

int terrain_id_by_name(const std::string& name, const std::string& where) {
  const auto& cat = terrain_catalog();
  for (std::size_t i = 0; i < cat.size(); ++i)
    if (cat[i].name == name) return int(i);
  throw ConfigError(where + ": unknown terrain '" + name + "'");
}

template <class E>
struct EnumNames {
  std::vector<std::pair<E, const char*>> items;
  E parse(const std::string& s, const std::string& where) const {
    for (const auto& [e, n] : items)
      if (s == n) return e;
    throw ConfigError(where + ": unknown value '" + s + "'");
  }
  const char* name(E e) const {
    for (const auto& [v, n] : items)
      if (v == e) return n;
    return "?";
  }
};

const EnumNames<OptimizerKind> kOptimizers{{{OptimizerKind::SGD, "sgd"}, {OptimizerKind::AdamW, "adamw"}}};
const EnumNames<BoundaryPolicy::Kind> kBoundaries{
    {{BoundaryPolicy::Kind::KappaSigma, "kappa-sigma"}, {BoundaryPolicy::Kind::Fixed, "fixed"}}};
const EnumNames<UnknownPolicy::Kind> kUnknown{
    {{UnknownPolicy::Kind::Forbid, "forbid"}, {UnknownPolicy::Kind::Penalty, "penalty"}}};
const EnumNames<MaeNormalization> kMae{
    {{MaeNormalization::TotalPixels, "total"}, {MaeNormalization::LabeledPixels, "labeled"}}};

// Value codecs. decode() throws nlohmann type errors that the reader rewraps.
template <class T>
void decode(const Json& j, T& v, const std::string&) { v = j.get<T>(); }
template <class T>
Json encode(const T& v) { return Json(v); }

void decode(const Json& j, Vec2& v, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(where + ": expected [x, y]");
  v = {j[0].get<double>(), j[1].get<double>()};
}
Json encode(const Vec2& v) { return Json::array({v.x(), v.y()}); }

void decode(const Json& j, std::vector<Vec2>& v, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected a list of [x, y]");
  v.clear();
  for (const auto& e : j) {
    Vec2 p;
    decode(e, p, where);
    v.push_back(p);
  }
}
Json encode(const std::vector<Vec2>& v) {
  Json a = Json::array();
  for (const auto& p : v) a.push_back(encode(p));
  return a;
}

void decode(const Json& j, std::optional<double>& v, const std::string&) {
  if (j.is_null()) v.reset();
  else v = j.get<double>();
}
Json encode(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

void decode(const Json& j, LabelMode& v, const std::string& where) {
  const auto m = parse_label_mode(j.get<std::string>());
  if (!m) throw ConfigError(where + ": unknown mode '" + j.get<std::string>() + "'");
  v = *m;
}
Json encode(const LabelMode& v) { return to_string(v); }

#define COTMAP_ENUM_CODEC(Type, table)                                                               \
  void decode(const Json& j, Type& v, const std::string& where) { v = table.parse(j.get<std::string>(), where); } \
  Json encode(const Type& v) { return table.name(v); }
COTMAP_ENUM_CODEC(OptimizerKind, kOptimizers)
COTMAP_ENUM_CODEC(BoundaryPolicy::Kind, kBoundaries)
COTMAP_ENUM_CODEC(UnknownPolicy::Kind, kUnknown)
COTMAP_ENUM_CODEC(MaeNormalization, kMae)
#undef COTMAP_ENUM_CODEC

// Terrain lists and tables are keyed by catalog name.
struct TerrainList {
  std::vector<int>* ids;
};
void decode(const Json& j, TerrainList& v, const std::string& where) {
  v.ids->clear();
  for (const auto& e : j) v.ids->push_back(terrain_id_by_name(e.get<std::string>(), where));
}
Json encode(const TerrainList& v) {
  Json a = Json::array();
  for (int id : *v.ids) a.push_back(terrain_catalog()[std::size_t(id)].name);
  return a;
}
struct TerrainTable {
  std::map<int, double>* table;
};
void decode(const Json& j, TerrainTable& v, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object keyed by terrain name");
  v.table->clear();
  for (const auto& [k, val] : j.items()) (*v.table)[terrain_id_by_name(k, where)] = val.get<double>();
}
Json encode(const TerrainTable& v) {
  Json o = Json::object();
  for (const auto& [id, k] : *v.table) o[terrain_catalog()[std::size_t(id)].name] = k;
  return o;
}

class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError((path_.empty() ? std::string("config") : path_) + ": expected an object");
  }
  template <class T>
  void field(const char* key, T& v) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const std::string where = path_ + key;
    try {
      decode(j_.at(key), v, where);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  template <class T>
  void adapted(const char* key, T adapter) { field(key, adapter); }
  template <class F>
  void section(const char* key, F&& body) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    Reader sub(j_.at(key), path_ + key + ".");
    body(sub);
    sub.finish();
  }
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + path_ + k + "'");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  explicit Writer(Json& j) : j_(j) { j_ = Json::object(); }
  template <class T>
  void field(const char* key, T& v) { j_[key] = encode(v); }
  template <class T>
  void adapted(const char* key, T adapter) { j_[key] = encode(adapter); }
  template <class F>
  void section(const char* key, F&& body) {
    Json sub;
    Writer w(sub);
    body(w);
    j_[key] = sub;
  }

 private:
  Json& j_;
};

template <class V>
void visit(V& v, RunConfig& c) {
  v.field("seed", c.seed);
  v.field("mode", c.mode);
  v.field("jobs", c.jobs);
  v.field("holdout_every", c.holdout_every);
  v.section("camera", [&](auto& s) {
    auto& k = c.sim.camera;
    s.field("fx", k.fx);
    s.field("fy", k.fy);
    s.field("cx", k.cx);
    s.field("cy", k.cy);
    s.field("width", k.width);
    s.field("height", k.height);
    s.field("mount_height", c.sim.mount_height);
    s.field("pitch_deg", c.sim.pitch_deg);
  });
  v.section("world", [&](auto& s) {
    auto& w = c.sim.world;
    s.field("ncols", w.ncols);
    s.field("nrows", w.nrows);
    s.field("cell_size", w.cell_size);
    s.adapted("strips", TerrainList{&w.strip_terrains});
    s.field("strip_widths", w.strip_widths);
    s.field("random_obstacles", w.random_obstacles);
    s.field("path_obstacles", w.path_obstacles);
    s.field("keepout_margin", w.keepout_margin);
    s.field("path_obstacle_gap", w.path_obstacle_gap);
  });
  v.section("route", [&](auto& s) {
    s.field("waypoints", c.sim.waypoints);
    s.field("v_cmd", c.sim.drive.v_cmd);
    s.field("dt", c.sim.drive.dt);
    s.field("voltage", c.sim.drive.voltage);
  });
  v.section("power", [&](auto& s) {
    s.adapted("rolling", TerrainTable{&c.sim.power.rolling});
    s.field("idle_power", c.sim.power.idle_power);
    s.field("noise_std", c.sim.power.noise_std);
  });
  v.section("robot", [&](auto& s) {
    s.field("mass", c.sim.robot.mass);
    s.field("gravity", c.sim.robot.gravity);
    s.field("width", c.sim.robot.width);
  });
  v.section("keyframes", [&](auto& s) {
    s.field("trans_thresh", c.sim.kf_trans);
    s.field("rot_thresh_deg", c.sim.kf_rot_deg);
    s.field("max_depth", c.sim.render.max_depth);
    s.field("cloud_stride", c.sim.cloud_stride);
  });
  v.section("label", [&](auto& s) {
    auto& l = c.label;
    s.field("horizon", l.cot.horizon);
    s.field("nontraversable_cot", l.cot.nontraversable_cot);
    s.field("splat_radius", l.splat_radius);
    s.field("cloud_depth_bias", l.cloud_depth_bias);
    s.field("depth_gate", l.depth_gate);
    s.field("depth_gate_abs", l.depth_gate_abs);
    s.field("depth_gate_rel", l.depth_gate_rel);
    s.section("overhead", [&](auto& o) {
      o.field("lateral_half_extent", l.overhead.lateral_half_extent);
      o.field("vertical_half_extent", l.overhead.vertical_half_extent);
      o.field("vertical_offset", l.overhead.vertical_offset);
      o.field("max_range", l.overhead.max_range);
    });
  });
  v.section("augment", [&](auto& s) {
    auto& a = c.augment;
    s.field("masks", a.masks);
    s.field("min_mask_pixels", a.min_mask_pixels);
    s.field("depth_scale", a.depth_scale);
    s.field("c1", a.recon.c1);
    s.field("c2", a.recon.c2);
    s.field("epochs", a.recon.epochs);
    s.field("batch", a.recon.batch);
    s.field("lr", a.recon.lr);
    s.field("weight_decay", a.recon.weight_decay);
    s.field("optimizer", a.recon.optimizer);
    s.field("per_channel_mean", a.recon.loss.per_channel_mean);
    s.field("masked_main", a.recon.loss.masked_main);
    s.field("boundary", a.boundary.kind);
    s.field("kappa", a.boundary.kappa);
    s.field("theta", a.boundary.theta);
  });
  v.section("regress", [&](auto& s) {
    auto& r = c.regress;
    s.field("lr", r.lr);
    s.field("weight_decay", r.weight_decay);
    s.field("epochs", r.epochs);
    s.field("batch", r.batch);
    s.field("hidden", r.hidden);
    s.field("feature_radius", r.feature_radius);
    s.field("n_paste", r.n_paste);
    s.field("hflip_probability", r.hflip_probability);
    s.field("cosine_decay", r.cosine_decay);
    s.field("normalization", r.normalization);
  });
  v.section("map", [&](auto& s) {
    s.field("cell_size", c.map.cell_size);
    s.field("origin", c.map.origin);
    s.field("rows", c.map.rows);
    s.field("cols", c.map.cols);
  });
  v.section("plan", [&](auto& s) {
    s.field("start", c.plan.start);
    s.field("goal", c.plan.goal);
    s.field("connectivity", c.plan.connectivity);
    s.field("unknown", c.plan.unknown.kind);
    s.field("unknown_penalty", c.plan.unknown.penalty);
    s.field("hard_forbid", c.plan.hard_forbid);
  });
}

template <class F>
void rethrow_as_config(const char* what, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

CotParams RunConfig::cot() const {
  CotParams p = label.cot;
  p.mass = sim.robot.mass;
  p.gravity = sim.robot.gravity;
  return p;
}

void RunConfig::validate() const {
  rethrow_as_config("camera", [&] { sim.camera.validate(); });
  if (sim.camera.height % 8 || sim.camera.width % 8)
    throw ConfigError("camera: width and height must be multiples of 8");
  if (!(sim.mount_height > 0.0)) throw ConfigError("camera.mount_height must be positive");
  rethrow_as_config("power", [&] { sim.power.validate(); });
  rethrow_as_config("robot", [&] { sim.robot.validate(); });
  for (int id : sim.world.strip_terrains)
    if (!sim.power.rolling.count(id))
      throw ConfigError("power.rolling: missing terrain '" + terrain_catalog()[std::size_t(id)].name + "'");
  if (sim.waypoints.size() < 2) throw ConfigError("route.waypoints: need at least two points");
  if (!(sim.kf_trans > 0.0) || !(sim.kf_rot_deg > 0.0)) throw ConfigError("keyframes: thresholds must be positive");
  if (sim.cloud_stride < 1) throw ConfigError("keyframes.cloud_stride must be >= 1");
  if (!(sim.render.max_depth > 0.0)) throw ConfigError("keyframes.max_depth must be positive");
  rethrow_as_config("label", [&] { cot().validate(); });
  rethrow_as_config("label.overhead", [&] { label.overhead.validate(); });
  if (!(augment.depth_scale > 0.0)) throw ConfigError("augment.depth_scale must be positive");
  if (augment.recon.c1 < 1 || augment.recon.c2 < 1 || augment.recon.epochs < 0 || augment.recon.batch < 1 ||
      !(augment.recon.lr > 0.0))
    throw ConfigError("augment: c1, c2, epochs, batch or lr out of range");
  if (augment.boundary.kind == BoundaryPolicy::Kind::Fixed && !(augment.boundary.theta > 0.0))
    throw ConfigError("augment.theta must be positive for the fixed boundary");
  rethrow_as_config("regress", [&] { regress.validate(); });
  if (holdout_every < 2) throw ConfigError("holdout_every must be >= 2");
  if (!(map.cell_size > 0.0) || map.rows < 0 || map.cols < 0) throw ConfigError("map: invalid cell size or extent");
  if (plan.connectivity != 4 && plan.connectivity != 8) throw ConfigError("plan.connectivity must be 4 or 8");
}

RunConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Reader r(j, "");
  visit(r, c);
  r.finish();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) {
  RunConfig c = cfg;
  Json j;
  Writer w(j);
  visit(w, c);
  return j.dump(2);
}

std::uint64_t stage_seed(std::uint64_t root, const char* stage) {
  std::uint64_t h = root;
  for (const char* p = stage; *p; ++p) h = mix_hash(h, static_cast<unsigned char>(*p));
  return h;
}

}  // namespace cotmap
