#pragma once

// Text and image interchange formats: telemetry JSONL, pose CSV, ASCII PLY, binary PPM.

#include "cotmap/cotlabel.hpp"
#include "cotmap/image.hpp"
#include "cotmap/simworld.hpp"

#include <filesystem>
#include <stdexcept>
#include <vector>

namespace cotmap {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One JSON object per line with keys t, x, y, z, qw, qx, qy, qz, v, current, voltage.
void write_telemetry_jsonl(const std::filesystem::path& path, const std::vector<TelemetrySample>& samples);
std::vector<TelemetrySample> read_telemetry_jsonl(const std::filesystem::path& path);

/// Header `index,x,y,z,qw,qx,qy,qz`.
void write_poses_csv(const std::filesystem::path& path, const std::vector<Pose>& poses);
std::vector<Pose> read_poses_csv(const std::filesystem::path& path);

void write_series_csv(const std::filesystem::path& path, const CotSeries& series);

/// ASCII PLY with vertex properties x y z only.
void write_ply(const std::filesystem::path& path, const PointCloud& points);
PointCloud read_ply(const std::filesystem::path& path);

/// Binary P6, 3 x H x W input.
void write_ppm(const std::filesystem::path& path, const ImageU8& rgb);
ImageU8 read_ppm(const std::filesystem::path& path);

}  // namespace cotmap
