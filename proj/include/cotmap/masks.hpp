#pragma once

#include "cotmap/image.hpp"
#include "cotmap/simworld.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace cotmap {

/// Binary terrain masks for one image, stacked as n x H x W (1 = inside).
struct MaskSet {
  ImageU8 masks;
  /// Ground-truth surface id per mask when the provider knows it, else -1.
  std::vector<int> source;

  MaskSet() = default;
  MaskSet(int height, int width) : masks(0, height, width) {}

  int count() const { return masks.channels; }
  int height() const { return masks.height; }
  int width() const { return masks.width; }
  bool in(int i, int y, int x) const { return masks.at(i, y, x) != 0; }
  std::size_t pixel_count(int i) const;
  void add(const std::vector<std::uint8_t>& plane, int source_id = -1);
  /// Throws std::invalid_argument if any mask is empty.
  void validate() const;
};

/// Seam for a terrain segmentation model.
class MaskProvider {
 public:
  virtual ~MaskProvider() = default;
  virtual MaskSet masks_for(const Keyframe& keyframe) const = 0;
};

/// Connected components (4-neighborhood) of the simulator's ground-truth surface ids.
class OracleMaskProvider final : public MaskProvider {
 public:
  explicit OracleMaskProvider(int min_pixels = 8) : min_pixels_(min_pixels) {}
  MaskSet masks_for(const Keyframe& keyframe) const override;

 private:
  int min_pixels_;
};

/// Reads `<dir>/kf_NNNN.cott` (u8, n_masks x H x W) for each keyframe id.
class FileMaskProvider final : public MaskProvider {
 public:
  explicit FileMaskProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}
  MaskSet masks_for(const Keyframe& keyframe) const override;

  static std::filesystem::path path_for(const std::filesystem::path& dir, int keyframe_id);

 private:
  std::filesystem::path dir_;
};

/// Majority pooling to (H/factor) x (W/factor): a cell is inside when at least half its pixels are.
ImageU8 downsample_masks(const ImageU8& masks, int factor);

}  // namespace cotmap
