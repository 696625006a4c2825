#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace cotmap {

/// Dense channel-major (C x H x W) grid.
template <class T>
struct Grid {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int c, int h, int w, T fill = T{})
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {
    if (c < 0 || h < 0 || w < 0) throw std::invalid_argument("Grid: negative dimension");
  }

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  T& at(int c, int y, int x) { return data[index(c, y, x)]; }
  const T& at(int c, int y, int x) const { return data[index(c, y, x)]; }
  T& at(int y, int x) { return data[index(0, y, x)]; }
  const T& at(int y, int x) const { return data[index(0, y, x)]; }

  std::span<T> channel(int c) { return {data.data() + c * plane(), plane()}; }
  std::span<const T> channel(int c) const { return {data.data() + c * plane(), plane()}; }

  bool same_shape(int c, int h, int w) const { return channels == c && height == h && width == w; }
  template <class U>
  bool same_plane(const Grid<U>& o) const { return height == o.height && width == o.width; }

  bool operator==(const Grid&) const = default;
};

using ImageF = Grid<float>;
using ImageU8 = Grid<std::uint8_t>;

}  // namespace cotmap
