#include "cotmap/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cotmap {

namespace {

struct ScreenVertex {
  double u, v, inv_z;
};

void check_buffers(const CameraIntrinsics& k, const DepthBuffer& zbuf, const CotLabelImage& out) {
  if (!zbuf.z.same_shape(1, k.height, k.width) || !out.value.same_shape(1, k.height, k.width) ||
      !out.provenance.same_shape(1, k.height, k.width))
    throw std::invalid_argument("render: buffer size does not match camera intrinsics");
}

// Sutherland-Hodgman against z >= near, camera frame.
int clip_near(const Vec3 in[3], Vec3 out[4]) {
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const Vec3& a = in[i];
    const Vec3& b = in[(i + 1) % 3];
    const bool a_in = a.z() >= kNearPlane;
    const bool b_in = b.z() >= kNearPlane;
    if (a_in) out[n++] = a;
    if (a_in != b_in) {
      const double t = (kNearPlane - a.z()) / (b.z() - a.z());
      Vec3 p = a + t * (b - a);
      p.z() = kNearPlane;
      out[n++] = p;
    }
  }
  return n;
}

// An edge owns its boundary pixels when the interior lies to its right (left edge)
// or below it (top edge), image y pointing down.
bool owns_boundary(double ex, double ey) {
  const double nx = -ey, ny = ex;  // inward normal for a positively oriented triangle
  return nx > 0.0 || (nx == 0.0 && ny > 0.0);
}

void raster_triangle(ScreenVertex a, ScreenVertex b, ScreenVertex c, float cot, const CameraIntrinsics& k,
                     DepthBuffer& zbuf, CotLabelImage& out) {
  double area = (b.u - a.u) * (c.v - a.v) - (b.v - a.v) * (c.u - a.u);
  if (area == 0.0 || !std::isfinite(area)) return;
  if (area < 0.0) {
    std::swap(b, c);
    area = -area;
  }
  const ScreenVertex vs[3] = {a, b, c};
  bool owns[3];
  for (int i = 0; i < 3; ++i) {
    const ScreenVertex& p = vs[i];
    const ScreenVertex& q = vs[(i + 1) % 3];
    owns[i] = owns_boundary(q.u - p.u, q.v - p.v);
  }
  const double umin = std::min({a.u, b.u, c.u}), umax = std::max({a.u, b.u, c.u});
  const double vmin = std::min({a.v, b.v, c.v}), vmax = std::max({a.v, b.v, c.v});
  const int x0 = std::max(0, static_cast<int>(std::floor(umin - 0.5)));
  const int x1 = std::min(k.width - 1, static_cast<int>(std::ceil(umax - 0.5)));
  const int y0 = std::max(0, static_cast<int>(std::floor(vmin - 0.5)));
  const int y1 = std::min(k.height - 1, static_cast<int>(std::ceil(vmax - 0.5)));

  for (int y = y0; y <= y1; ++y) {
    const double pv = y + 0.5;
    for (int x = x0; x <= x1; ++x) {
      const double pu = x + 0.5;
      double w[3];
      bool inside = true;
      for (int i = 0; i < 3 && inside; ++i) {
        const ScreenVertex& p = vs[i];
        const ScreenVertex& q = vs[(i + 1) % 3];
        const double e = (q.u - p.u) * (pv - p.v) - (q.v - p.v) * (pu - p.u);
        inside = e > 0.0 || (e == 0.0 && owns[i]);
        w[(i + 2) % 3] = e;  // edge opposite vertex (i+2)
      }
      if (!inside) continue;
      const double inv_z = (w[0] * vs[0].inv_z + w[1] * vs[1].inv_z + w[2] * vs[2].inv_z) / area;
      const double z = 1.0 / inv_z;
      double& zb = zbuf.z.at(y, x);
      if (z < zb) {
        zb = z;
        out.set(y, x, cot, Provenance::Path);
      }
    }
  }
}

}  // namespace

void rasterize_mesh(const TrajectoryMesh& mesh, const Pose& camera_pose, const CameraIntrinsics& k,
                    DepthBuffer& zbuf, CotLabelImage& out) {
  check_buffers(k, zbuf, out);
  const Pose cam_from_world = camera_pose.inverse();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    Vec3 tri[3];
    for (int i = 0; i < 3; ++i)
      tri[i] = transform_point(mesh.vertices[static_cast<std::size_t>(mesh.triangles[t][static_cast<std::size_t>(i)])],
                               cam_from_world);
    Vec3 poly[4];
    const int n = clip_near(tri, poly);
    if (n < 3) continue;
    ScreenVertex sv[4];
    for (int i = 0; i < n; ++i) {
      const Vec2 uv = project_point(poly[i], k);
      sv[i] = {uv.x(), uv.y(), 1.0 / poly[i].z()};
    }
    const auto cot = static_cast<float>(mesh.cot[t]);
    for (int i = 1; i + 1 < n; ++i) raster_triangle(sv[0], sv[i], sv[i + 1], cot, k, zbuf, out);
  }
}

void splat_points(const PointCloud& points, SplatMode mode, const SplatOptions& opts, const Pose& camera_pose,
                  const CameraIntrinsics& k, DepthBuffer& zbuf, CotLabelImage& out) {
  check_buffers(k, zbuf, out);
  if (!(opts.radius >= 0.0)) throw std::invalid_argument("splat_points: radius must be >= 0");
  const Pose cam_from_world = camera_pose.inverse();
  const int reach = static_cast<int>(std::floor(opts.radius));
  const double r2 = opts.radius * opts.radius;
  const float value = mode == SplatMode::Overhead ? static_cast<float>(opts.nontraversable_cot) : kUnknownCot;
  const Provenance prov = mode == SplatMode::Overhead ? Provenance::Overhead : Provenance::CloudUnknown;

  for (const auto& pw : points) {
    const Vec3 p = transform_point(pw, cam_from_world);
    if (p.z() < kNearPlane) continue;
    const Vec2 uv = project_point(p, k);
    if (!std::isfinite(uv.x()) || !std::isfinite(uv.y())) continue;
    const double fu = std::floor(uv.x()), fv = std::floor(uv.y());
    if (fu < -reach - 1 || fu > k.width + reach || fv < -reach - 1 || fv > k.height + reach) continue;
    const int px = static_cast<int>(fu), py = static_cast<int>(fv);
    const double z = p.z() + opts.depth_bias;
    for (int dy = -reach; dy <= reach; ++dy)
      for (int dx = -reach; dx <= reach; ++dx) {
        if (dx * dx + dy * dy > r2) continue;
        const int x = px + dx, y = py + dy;
        if (x < 0 || y < 0 || x >= k.width || y >= k.height) continue;
        double& zb = zbuf.z.at(y, x);
        if (z < zb) {
          zb = z;
          out.set(y, x, value, prov);
        }
      }
  }
}

CotLabelImage compose_label_image(const Keyframe& keyframe, const TrajectoryMesh& mesh, const PointCloud& overhead,
                                  const PointCloud& cloud, const CameraIntrinsics& k, const LabelParams& params) {
  CotLabelImage label(k.height, k.width);
  DepthBuffer zbuf(k.height, k.width);
  const Vec3 cam = keyframe.pose.translation;
  const double reach = params.overhead.max_range + mesh.width;

  TrajectoryMesh local;
  local.width = mesh.width;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec3 centroid = (mesh.vertices[std::size_t(tri[0])] + mesh.vertices[std::size_t(tri[1])] +
                           mesh.vertices[std::size_t(tri[2])]) / 3.0;
    if ((centroid - cam).norm() > reach) continue;
    const int base = static_cast<int>(local.vertices.size());
    for (int i = 0; i < 3; ++i) local.vertices.push_back(mesh.vertices[std::size_t(tri[std::size_t(i)])]);
    local.triangles.push_back({base, base + 1, base + 2});
    local.cot.push_back(mesh.cot[t]);
  }
  rasterize_mesh(local, keyframe.pose, k, zbuf, label);

  SplatOptions so;
  so.radius = params.splat_radius;
  so.nontraversable_cot = params.cot.nontraversable_cot;
  splat_points(overhead, SplatMode::Overhead, so, keyframe.pose, k, zbuf, label);
  so.depth_bias = params.cloud_depth_bias;
  splat_points(cloud, SplatMode::Cloud, so, keyframe.pose, k, zbuf, label);

  if (params.depth_gate) {
    if (!keyframe.depth.same_shape(1, k.height, k.width))
      throw std::invalid_argument("compose_label_image: keyframe depth does not match intrinsics");
    for (int y = 0; y < k.height; ++y)
      for (int x = 0; x < k.width; ++x) {
        const Provenance p = label.prov(y, x);
        if (p != Provenance::Path && p != Provenance::Overhead) continue;
        const double observed = keyframe.depth.at(y, x);
        const double rendered = zbuf.z.at(y, x);
        const bool ok = observed > 0.0 &&
                        std::abs(rendered - observed) <= params.depth_gate_abs + params.depth_gate_rel * observed;
        if (!ok) label.set(y, x, kUnknownCot, Provenance::None);
      }
  }
  return label;
}

std::vector<CotLabelImage> compose_label_images(const std::vector<Keyframe>& keyframes, const TrajectoryMesh& mesh,
                                                const PointCloud& overhead, const PointCloud& cloud,
                                                const CameraIntrinsics& k, const LabelParams& params, Exec exec) {
  std::vector<CotLabelImage> out(keyframes.size());
  const auto n = static_cast<std::ptrdiff_t>(keyframes.size());
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[std::size_t(i)] = compose_label_image(keyframes[std::size_t(i)], mesh, overhead, cloud, k, params);
  return out;
}

double coverage(const CotLabelImage& label) {
  const auto& d = label.value.data;
  if (d.empty()) return 0.0;
  const auto n = std::count_if(d.begin(), d.end(), [](float v) { return v > 0.0f; });
  return double(n) / double(d.size());
}

double coverage(const std::vector<CotLabelImage>& labels) {
  std::size_t hit = 0, total = 0;
  for (const auto& l : labels) {
    hit += static_cast<std::size_t>(std::count_if(l.value.data.begin(), l.value.data.end(), [](float v) { return v > 0.0f; }));
    total += l.value.data.size();
  }
  return total ? double(hit) / double(total) : 0.0;
}

}  // namespace cotmap
