#include "cotmap/formats.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace cotmap {

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw FormatError("cannot open for writing: " + path.string());
  return f;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
  if (!f) throw FormatError("cannot open: " + path.string());
  return f;
}

// Shortest round-trip text for doubles keeps files diffable and exact.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> split_doubles(const std::string& line, const std::filesystem::path& path, std::size_t lineno) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
    }
  }
  return out;
}

}  // namespace

void write_telemetry_jsonl(const std::filesystem::path& path, const std::vector<TelemetrySample>& samples) {
  auto f = open_out(path);
  for (const auto& s : samples) {
    const auto& p = s.pose.translation;
    const auto& q = s.pose.rotation;
    nlohmann::ordered_json j = {{"t", s.t},   {"x", p.x()},  {"y", p.y()},  {"z", p.z()},
                                {"qw", q.w()}, {"qx", q.x()}, {"qy", q.y()}, {"qz", q.z()},
                                {"v", s.v},   {"current", s.current}, {"voltage", s.voltage}};
    f << j.dump() << '\n';
  }
}

std::vector<TelemetrySample> read_telemetry_jsonl(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::vector<TelemetrySample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TelemetrySample s;
      s.t = j.at("t").get<double>();
      s.pose.translation = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>()};
      s.pose.rotation = Quat(j.at("qw").get<double>(), j.at("qx").get<double>(), j.at("qy").get<double>(),
                             j.at("qz").get<double>());
      s.v = j.at("v").get<double>();
      s.current = j.at("current").get<double>();
      s.voltage = j.at("voltage").get<double>();
      out.push_back(s);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_poses_csv(const std::filesystem::path& path, const std::vector<Pose>& poses) {
  auto f = open_out(path);
  f << "index,x,y,z,qw,qx,qy,qz\n";
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto& p = poses[i].translation;
    const auto& q = poses[i].rotation;
    f << i << ',' << num(p.x()) << ',' << num(p.y()) << ',' << num(p.z()) << ',' << num(q.w()) << ','
      << num(q.x()) << ',' << num(q.y()) << ',' << num(q.z()) << '\n';
  }
}

std::vector<Pose> read_poses_csv(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("index,", 0) != 0) throw FormatError(path.string() + ": missing header");
  std::vector<Pose> out;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto v = split_doubles(line, path, lineno);
    if (v.size() != 8) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 8 columns");
    Pose p;
    p.translation = {v[1], v[2], v[3]};
    p.rotation = Quat(v[4], v[5], v[6], v[7]);
    out.push_back(p);
  }
  return out;
}

void write_series_csv(const std::filesystem::path& path, const CotSeries& series) {
  auto f = open_out(path);
  f << "s,cot\n";
  for (std::size_t i = 0; i < series.s.size(); ++i) f << num(series.s[i]) << ',' << num(series.cot[i]) << '\n';
}

void write_ply(const std::filesystem::path& path, const PointCloud& points) {
  auto f = open_out(path);
  f << "ply\nformat ascii 1.0\nelement vertex " << points.size()
    << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  for (const auto& p : points) f << num(p.x()) << ' ' << num(p.y()) << ' ' << num(p.z()) << '\n';
}

PointCloud read_ply(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line) || line != "ply") throw FormatError(path.string() + ": not a PLY file");
  std::size_t count = 0;
  bool ascii = false;
  int props = 0;
  while (std::getline(f, line) && line != "end_header") {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "format") {
      std::string kind;
      ss >> kind;
      ascii = kind == "ascii";
    } else if (key == "element") {
      std::string name;
      ss >> name >> count;
      if (name != "vertex") throw FormatError(path.string() + ": unsupported element " + name);
    } else if (key == "property") {
      ++props;
    }
  }
  if (line != "end_header") throw FormatError(path.string() + ": truncated header");
  if (!ascii) throw FormatError(path.string() + ": only ascii PLY is supported");
  if (props != 3) throw FormatError(path.string() + ": expected x y z properties");
  PointCloud out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double x, y, z;
    if (!(f >> x >> y >> z)) throw FormatError(path.string() + ": truncated vertex list");
    out.emplace_back(x, y, z);
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const ImageU8& rgb) {
  if (rgb.channels != 3) throw FormatError("write_ppm: expected 3 channels");
  auto f = open_out(path, true);
  f << "P6\n" << rgb.width << ' ' << rgb.height << "\n255\n";
  std::vector<char> row(static_cast<std::size_t>(rgb.width) * 3);
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x)
      for (int c = 0; c < 3; ++c) row[std::size_t(x) * 3 + std::size_t(c)] = static_cast<char>(rgb.at(c, y, x));
    f.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

ImageU8 read_ppm(const std::filesystem::path& path) {
  auto f = open_in(path, true);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  f >> magic >> w >> h >> maxv;
  if (magic != "P6" || w <= 0 || h <= 0 || maxv != 255) throw FormatError(path.string() + ": unsupported PPM");
  f.get();
  ImageU8 img(3, h, w);
  std::vector<char> row(static_cast<std::size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    if (!f.read(row.data(), static_cast<std::streamsize>(row.size()))) throw FormatError(path.string() + ": truncated");
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<std::uint8_t>(row[std::size_t(x) * 3 + std::size_t(c)]);
  }
  return img;
}

}  // namespace cotmap
