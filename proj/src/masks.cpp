#include "cotmap/masks.hpp"

#include "cotmap/tensor_io.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace cotmap {

std::size_t MaskSet::pixel_count(int i) const {
  const auto ch = masks.channel(i);
  return static_cast<std::size_t>(std::count_if(ch.begin(), ch.end(), [](std::uint8_t v) { return v != 0; }));
}

void MaskSet::add(const std::vector<std::uint8_t>& plane, int source_id) {
  if (plane.size() != masks.plane()) throw std::invalid_argument("MaskSet::add: mask size mismatch");
  masks.data.insert(masks.data.end(), plane.begin(), plane.end());
  ++masks.channels;
  source.push_back(source_id);
}

void MaskSet::validate() const {
  for (int i = 0; i < count(); ++i)
    if (pixel_count(i) == 0) throw std::invalid_argument("MaskSet: mask " + std::to_string(i) + " is empty");
}

MaskSet OracleMaskProvider::masks_for(const Keyframe& keyframe) const {
  const ImageU8& s = keyframe.surface;
  const int h = s.height, w = s.width;
  MaskSet out(h, w);
  std::vector<int> comp(static_cast<std::size_t>(h) * w, -1);
  std::vector<int> stack;
  int next = 0;
  for (int start = 0; start < h * w; ++start) {
    if (comp[std::size_t(start)] >= 0) continue;
    const std::uint8_t id = s.data[std::size_t(start)];
    std::vector<std::uint8_t> plane(static_cast<std::size_t>(h) * w, 0);
    std::size_t size = 0;
    stack.assign(1, start);
    comp[std::size_t(start)] = next;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      plane[std::size_t(p)] = 1;
      ++size;
      const int y = p / w, x = p % w;
      const int nbr[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& n : nbr) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= h || n[1] >= w) continue;
        const int q = n[0] * w + n[1];
        if (comp[std::size_t(q)] < 0 && s.data[std::size_t(q)] == id) {
          comp[std::size_t(q)] = next;
          stack.push_back(q);
        }
      }
    }
    ++next;
    if (size >= static_cast<std::size_t>(std::max(1, min_pixels_))) out.add(plane, id);
  }
  return out;
}

std::filesystem::path FileMaskProvider::path_for(const std::filesystem::path& dir, int keyframe_id) {
  char name[32];
  std::snprintf(name, sizeof(name), "kf_%04d.cott", keyframe_id);
  return dir / name;
}

MaskSet FileMaskProvider::masks_for(const Keyframe& keyframe) const {
  const ImageU8 stack = image_u8(read_tensor(path_for(dir_, keyframe.id)));
  if (stack.height != keyframe.rgb.height || stack.width != keyframe.rgb.width)
    throw std::invalid_argument("mask file does not match keyframe size");
  MaskSet out;
  out.masks = stack;
  out.source.assign(static_cast<std::size_t>(stack.channels), -1);
  for (auto& v : out.masks.data) v = v ? 1 : 0;
  out.validate();
  return out;
}

ImageU8 downsample_masks(const ImageU8& masks, int factor) {
  if (factor < 1 || masks.height % factor || masks.width % factor)
    throw std::invalid_argument("downsample_masks: size not divisible by factor");
  const int h = masks.height / factor, w = masks.width / factor;
  ImageU8 out(masks.channels, h, w, 0);
  const int need = (factor * factor + 1) / 2;
  for (int c = 0; c < masks.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        int n = 0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx) n += masks.at(c, y * factor + dy, x * factor + dx) != 0;
        out.at(c, y, x) = n >= need ? 1 : 0;
      }
  return out;
}

}  // namespace cotmap
