#include "cotmap/bev.hpp"

#include "cotmap/tensor_io.hpp"

#include <nlohmann/json.hpp>

#include <climits>
#include <cmath>
#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace cotmap {

namespace {

bool lattice_aligned(double v, double cs) {
  const double q = v / cs;
  return std::abs(q - std::round(q)) < 1e-6;
}

}  // namespace

int bev_index(double coord, double origin, double cell_size) {
  return static_cast<int>(std::ceil((coord - origin) / cell_size)) - 1;
}

std::size_t LocalBevMap::occupied_count() const {
  std::size_t n = 0;
  for (double d : distance) n += d < kNoDistance;
  return n;
}

LocalBevMap project_to_local_bev(const ImageF& cot_image, const ImageF& depth, const Pose& camera_pose,
                                 const CameraIntrinsics& k, double cell_size) {
  if (!(cell_size > 0.0)) throw std::invalid_argument("project_to_local_bev: cell_size must be positive");
  if (!cot_image.same_shape(1, k.height, k.width) || !depth.same_shape(1, k.height, k.width))
    throw std::invalid_argument("project_to_local_bev: image size does not match intrinsics");

  struct Obs {
    long gx, gy;
    double cot, dist;
  };
  std::vector<Obs> obs;
  long min_x = LONG_MAX, min_y = LONG_MAX, max_x = LONG_MIN, max_y = LONG_MIN;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const double d = depth.at(y, x), c = cot_image.at(y, x);
      if (!(d > 0.0) || !(c > 0.0)) continue;
      const Vec3 pc = unproject_pixel({x + 0.5, y + 0.5, d}, k);
      const Vec3 pw = transform_point(pc, camera_pose);
      const long gx = bev_index(pw.x(), 0.0, cell_size);
      const long gy = bev_index(pw.y(), 0.0, cell_size);
      obs.push_back({gx, gy, c, pc.norm()});
      min_x = std::min(min_x, gx);
      max_x = std::max(max_x, gx);
      min_y = std::min(min_y, gy);
      max_y = std::max(max_y, gy);
    }
  LocalBevMap m;
  m.cell_size = cell_size;
  if (obs.empty()) return m;
  m.origin = {double(min_x) * cell_size, double(min_y) * cell_size};
  m.cols = int(max_x - min_x + 1);
  m.rows = int(max_y - min_y + 1);
  m.cot.assign(std::size_t(m.rows) * std::size_t(m.cols), 0.0);
  m.distance.assign(m.cot.size(), kNoDistance);
  for (const auto& o : obs) {
    const std::size_t i = std::size_t(o.gy - min_y) * std::size_t(m.cols) + std::size_t(o.gx - min_x);
    if (o.dist < m.distance[i]) {
      m.distance[i] = o.dist;
      m.cot[i] = o.cot;
    }
  }
  return m;
}

GlobalBevMap::GlobalBevMap(Vec2 origin_, double cell_size_, int rows, int cols)
    : origin(origin_), cell_size(cell_size_), grid(2, rows, cols, 0.0) {
  if (!(cell_size_ > 0.0) || rows <= 0 || cols <= 0)
    throw std::invalid_argument("global map: cell_size and extent must be positive");
  if (!lattice_aligned(origin_.x(), cell_size_) || !lattice_aligned(origin_.y(), cell_size_))
    throw std::invalid_argument("global map: origin must lie on the cell lattice");
  std::fill(grid.data.begin() + std::ptrdiff_t(grid.plane()), grid.data.end(), kNoDistance);
}

Vec2 GlobalBevMap::center(int r, int c) const {
  return {origin.x() + (c + 0.5) * cell_size, origin.y() + (r + 0.5) * cell_size};
}

void merge_into_global(GlobalBevMap& global, const LocalBevMap& local) {
  if (local.rows == 0 || local.cols == 0) return;
  if (std::abs(local.cell_size - global.cell_size) > 1e-12 * global.cell_size)
    throw std::invalid_argument("merge_into_global: cell size mismatch");
  const double ox = (local.origin.x() - global.origin.x()) / global.cell_size;
  const double oy = (local.origin.y() - global.origin.y()) / global.cell_size;
  if (std::abs(ox - std::round(ox)) > 1e-6 || std::abs(oy - std::round(oy)) > 1e-6)
    throw std::invalid_argument("merge_into_global: local map is not on the global lattice");
  const int c0 = int(std::lround(ox)), r0 = int(std::lround(oy));
  if (c0 < 0 || r0 < 0 || c0 + local.cols > global.cols() || r0 + local.rows > global.rows())
    throw std::out_of_range("merge_into_global: local footprint outside the global extent");
  for (int r = 0; r < local.rows; ++r)
    for (int c = 0; c < local.cols; ++c) {
      const std::size_t i = std::size_t(r) * std::size_t(local.cols) + std::size_t(c);
      if (local.distance[i] < global.distance(r0 + r, c0 + c)) {
        global.distance(r0 + r, c0 + c) = local.distance[i];
        global.cot(r0 + r, c0 + c) = local.cot[i];
      }
    }
}

LocalBevMap crop_to_extent(const LocalBevMap& local, const GlobalBevMap& global) {
  if (local.rows == 0 || local.cols == 0) return local;
  const int c0 = int(std::lround((local.origin.x() - global.origin.x()) / global.cell_size));
  const int r0 = int(std::lround((local.origin.y() - global.origin.y()) / global.cell_size));
  const int lo_c = std::max(0, -c0), hi_c = std::min(local.cols, global.cols() - c0);
  const int lo_r = std::max(0, -r0), hi_r = std::min(local.rows, global.rows() - r0);
  LocalBevMap out;
  out.cell_size = local.cell_size;
  if (lo_c >= hi_c || lo_r >= hi_r) return out;
  out.origin = local.origin + Vec2(lo_c * local.cell_size, lo_r * local.cell_size);
  out.rows = hi_r - lo_r;
  out.cols = hi_c - lo_c;
  out.cot.resize(std::size_t(out.rows) * std::size_t(out.cols));
  out.distance.resize(out.cot.size());
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) {
      const std::size_t src = std::size_t(r + lo_r) * std::size_t(local.cols) + std::size_t(c + lo_c);
      const std::size_t dst = std::size_t(r) * std::size_t(out.cols) + std::size_t(c);
      out.cot[dst] = local.cot[src];
      out.distance[dst] = local.distance[src];
    }
  return out;
}

CellQuery query_cell(const GlobalBevMap& global, const Vec2& p) {
  const int c = bev_index(p.x(), global.origin.x(), global.cell_size);
  const int r = bev_index(p.y(), global.origin.y(), global.cell_size);
  if (c < 0 || r < 0 || c >= global.cols() || r >= global.rows())
    throw std::out_of_range("query_cell: point outside the map");
  return {global.cot(r, c), global.distance(r, c), r, c};
}

void write_global_map(const std::filesystem::path& tensor_path, const std::filesystem::path& meta_path,
                      const GlobalBevMap& map) {
  Tensor t;
  t.dtype = DType::F32;
  t.dims = {2u, std::uint32_t(map.rows()), std::uint32_t(map.cols())};
  t.f32.resize(map.grid.data.size());
  for (std::size_t i = 0; i < t.f32.size(); ++i) t.f32[i] = static_cast<float>(map.grid.data[i]);
  write_tensor(tensor_path, t);
  nlohmann::ordered_json j = {{"origin", {map.origin.x(), map.origin.y()}},
                              {"cell_size", map.cell_size},
                              {"rows", map.rows()},
                              {"cols", map.cols()},
                              {"channels", {"cot", "distance"}}};
  std::ofstream f(meta_path);
  if (!f) throw std::runtime_error("cannot write " + meta_path.string());
  f << j.dump(2) << '\n';
}

GlobalBevMap read_global_map(const std::filesystem::path& tensor_path, const std::filesystem::path& meta_path) {
  std::ifstream f(meta_path);
  if (!f) throw std::runtime_error("cannot read " + meta_path.string());
  const auto j = nlohmann::json::parse(f);
  GlobalBevMap m({j.at("origin")[0].get<double>(), j.at("origin")[1].get<double>()}, j.at("cell_size").get<double>(),
                 j.at("rows").get<int>(), j.at("cols").get<int>());
  const Tensor t = read_tensor(tensor_path);
  if (t.dtype != DType::F32 || t.f32.size() != m.grid.data.size())
    throw std::runtime_error("global map tensor does not match its metadata");
  std::copy(t.f32.begin(), t.f32.end(), m.grid.data.begin());
  return m;
}

}  // namespace cotmap
