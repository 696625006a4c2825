#include "cotmap/cotlabel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace cotmap {

void CotParams::validate() const {
  if (!(mass > 0.0) || !(gravity > 0.0)) throw std::invalid_argument("cot params: m and g must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("cot params: horizon must be positive");
  if (!(nontraversable_cot > 2.0)) throw std::invalid_argument("cot params: nontraversable_cot must exceed 2.0");
}

CotSeries compute_cot_series(const std::vector<TelemetrySample>& telemetry, const CotParams& params) {
  params.validate();
  const std::size_t n = telemetry.size();
  if (n < 2) throw std::invalid_argument("compute_cot_series: need at least two samples");

  CotSeries out;
  out.s.resize(n);
  out.s[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    if (!(telemetry[i].t > telemetry[i - 1].t))
      throw std::invalid_argument("compute_cot_series: timestamps must be strictly increasing");
    out.s[i] = out.s[i - 1] + (telemetry[i].pose.translation - telemetry[i - 1].pose.translation).norm();
  }
  const double total = out.s.back();
  if (!(total > 0.0)) throw std::invalid_argument("compute_cot_series: zero total distance");

  // cum_e[j] = energy of all intervals before sample j.
  std::vector<double> energy(n - 1), cum_e(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    energy[i] = telemetry[i].power() * (telemetry[i + 1].t - telemetry[i].t);
    cum_e[i + 1] = cum_e[i] + energy[i];
  }
  const auto& s = out.s;
  // Cumulative energy up to arc length x; stationary intervals at x count on the right side only.
  auto energy_right = [&](double x) {
    const auto j = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), x) - s.begin()) - 1;
    if (j + 1 >= n) return cum_e[n - 1];
    const double d = s[j + 1] - s[j];
    return cum_e[j] + (d > 0.0 ? energy[j] * (x - s[j]) / d : 0.0);
  };
  auto energy_left = [&](double x) {
    const auto j = static_cast<std::size_t>(std::lower_bound(s.begin(), s.end(), x) - s.begin());
    if (j == 0) return 0.0;
    if (j >= n) return cum_e[n - 1];
    const double d = s[j] - s[j - 1];
    return cum_e[j - 1] + energy[j - 1] * (x - s[j - 1]) / d;
  };

  const double mg = params.mass * params.gravity;
  out.cot.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double lo = 0.0, hi = total;
    if (params.horizon < total) {
      lo = s[i] - 0.5 * params.horizon;
      hi = s[i] + 0.5 * params.horizon;
      if (lo < 0.0) {
        lo = 0.0;
        hi = params.horizon;
      } else if (hi > total) {
        hi = total;
        lo = total - params.horizon;
      }
    }
    out.cot[i] = (energy_right(hi) - energy_left(lo)) / (mg * (hi - lo));
  }
  return out;
}

double TrajectoryMesh::area() const {
  double a = 0.0;
  for (const auto& t : triangles) {
    const Vec3& p0 = vertices[static_cast<std::size_t>(t[0])];
    a += 0.5 * (vertices[static_cast<std::size_t>(t[1])] - p0).cross(vertices[static_cast<std::size_t>(t[2])] - p0).norm();
  }
  return a;
}

TrajectoryMesh build_trajectory_mesh(const std::vector<Pose>& poses, const CotSeries& series, double width) {
  if (poses.size() < 2) throw std::invalid_argument("build_trajectory_mesh: need at least two poses");
  if (series.cot.size() != poses.size())
    throw std::invalid_argument("build_trajectory_mesh: series and poses are not aligned");
  if (!(width > 0.0)) throw std::invalid_argument("build_trajectory_mesh: width must be positive");

  TrajectoryMesh mesh;
  mesh.width = width;
  for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
    const Vec3 a = poses[i].translation, b = poses[i + 1].translation;
    Vec2 dir(b.x() - a.x(), b.y() - a.y());
    if (dir.norm() < 1e-12) continue;
    dir.normalize();
    const Vec3 half = 0.5 * width * Vec3(-dir.y(), dir.x(), 0.0);
    const int base = static_cast<int>(mesh.vertices.size());
    mesh.vertices.insert(mesh.vertices.end(), {a + half, a - half, b - half, b + half});
    mesh.triangles.push_back({base, base + 1, base + 2});
    mesh.triangles.push_back({base, base + 2, base + 3});
    const double c = 0.5 * (series.cot[i] + series.cot[i + 1]);
    mesh.cot.push_back(c);
    mesh.cot.push_back(c);
  }
  return mesh;
}

void OverheadRegion::validate() const {
  if (!(lateral_half_extent > 0.0) || !(vertical_half_extent > 0.0) || !(vertical_offset > 0.0) || !(max_range > 0.0))
    throw std::invalid_argument("overhead region extents must be positive");
}

PointCloud extract_overhead_points(const PointCloud& cloud, const std::vector<Pose>& poses,
                                   const OverheadRegion& region, std::optional<Vec3> reference, Exec exec) {
  region.validate();
  struct Segment {
    Vec3 a, b;
  };
  std::vector<Segment> segs;
  auto in_range = [&](const Vec3& p) { return !reference || (p - *reference).norm() <= region.max_range; };
  if (poses.size() == 1) {
    if (in_range(poses[0].translation)) segs.push_back({poses[0].translation, poses[0].translation});
  }
  for (std::size_t i = 0; i + 1 < poses.size(); ++i)
    if (in_range(poses[i].translation) && in_range(poses[i + 1].translation))
      segs.push_back({poses[i].translation, poses[i + 1].translation});

  const double z_lo = region.vertical_offset;
  const double z_hi = region.vertical_offset + 2.0 * region.vertical_half_extent;

  // Bucket segments on a coarse xy grid so each point only tests nearby segments.
  constexpr double kBucket = 2.0;
  double min_x = 0.0, min_y = 0.0;
  int nbx = 0, nby = 0;
  std::vector<std::vector<std::uint32_t>> buckets;
  if (!segs.empty()) {
    min_x = min_y = std::numeric_limits<double>::infinity();
    double max_x = -min_x, max_y = -min_y;
    for (const auto& sg : segs) {
      min_x = std::min({min_x, sg.a.x(), sg.b.x()});
      max_x = std::max({max_x, sg.a.x(), sg.b.x()});
      min_y = std::min({min_y, sg.a.y(), sg.b.y()});
      max_y = std::max({max_y, sg.a.y(), sg.b.y()});
    }
    const double pad = region.lateral_half_extent;
    min_x -= pad;
    min_y -= pad;
    nbx = int((max_x + pad - min_x) / kBucket) + 1;
    nby = int((max_y + pad - min_y) / kBucket) + 1;
    buckets.resize(std::size_t(nbx) * std::size_t(nby));
    for (std::size_t s = 0; s < segs.size(); ++s) {
      const int x0 = int((std::min(segs[s].a.x(), segs[s].b.x()) - pad - min_x) / kBucket);
      const int x1 = int((std::max(segs[s].a.x(), segs[s].b.x()) + pad - min_x) / kBucket);
      const int y0 = int((std::min(segs[s].a.y(), segs[s].b.y()) - pad - min_y) / kBucket);
      const int y1 = int((std::max(segs[s].a.y(), segs[s].b.y()) + pad - min_y) / kBucket);
      for (int by = std::max(0, y0); by <= std::min(nby - 1, y1); ++by)
        for (int bx = std::max(0, x0); bx <= std::min(nbx - 1, x1); ++bx)
          buckets[std::size_t(by) * std::size_t(nbx) + std::size_t(bx)].push_back(std::uint32_t(s));
    }
  }

  std::vector<std::uint8_t> keep(cloud.size(), 0);
  const auto n = static_cast<std::ptrdiff_t>(cloud.size());
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Vec3& p = cloud[static_cast<std::size_t>(i)];
    const double fx = (p.x() - min_x) / kBucket, fy = (p.y() - min_y) / kBucket;
    if (!(fx >= 0.0 && fy >= 0.0 && fx < nbx && fy < nby)) continue;
    for (std::uint32_t si : buckets[std::size_t(fy) * std::size_t(nbx) + std::size_t(fx)]) {
      const auto& sg = segs[si];
      const Vec2 a(sg.a.x(), sg.a.y()), ab(sg.b.x() - sg.a.x(), sg.b.y() - sg.a.y());
      const double len2 = ab.squaredNorm();
      const double t = len2 > 0.0 ? std::clamp((Vec2(p.x(), p.y()) - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
      if ((a + t * ab - Vec2(p.x(), p.y())).norm() > region.lateral_half_extent) continue;
      const double h = p.z() - (sg.a.z() + t * (sg.b.z() - sg.a.z()));
      if (h >= z_lo && h <= z_hi) {
        keep[static_cast<std::size_t>(i)] = 1;
        break;
      }
    }
  }
  PointCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (keep[i]) out.push_back(cloud[i]);
  return out;
}

}  // namespace cotmap
