#include "cotmap/colormap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace cotmap {

namespace {

// Viridis sampled at five evenly spaced stops.
constexpr std::array<std::array<double, 3>, 5> kStops = {{
    {68, 1, 84},
    {59, 82, 139},
    {33, 145, 140},
    {94, 201, 98},
    {253, 231, 37},
}};

void put(ImageU8& img, int y, int x, Rgb c) {
  for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = c[std::size_t(ch)];
}

}  // namespace

Rgb cot_color(double cot, double nontraversable) {
  if (!(cot > 0.0)) return {255, 255, 255};
  if (cot >= nontraversable) return {0, 0, 0};
  const double t = std::clamp((cot - kColormapLow) / (kColormapHigh - kColormapLow), 0.0, 1.0) * (kStops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), kStops.size() - 2);
  const double f = t - double(i);
  Rgb out{};
  for (std::size_t c = 0; c < 3; ++c)
    out[c] = static_cast<std::uint8_t>(std::lround(kStops[i][c] + f * (kStops[i + 1][c] - kStops[i][c])));
  return out;
}

ImageU8 colorize_cot(const ImageF& cot, double nontraversable) {
  ImageU8 img(3, cot.height, cot.width);
  for (int y = 0; y < cot.height; ++y)
    for (int x = 0; x < cot.width; ++x) put(img, y, x, cot_color(cot.at(y, x), nontraversable));
  return img;
}

ImageU8 colorize_map(const GlobalBevMap& map, double nontraversable) {
  ImageU8 img(3, map.rows(), map.cols());
  for (int r = 0; r < map.rows(); ++r)
    for (int c = 0; c < map.cols(); ++c)
      put(img, map.rows() - 1 - r, c, cot_color(map.known(r, c) ? map.cot(r, c) : 0.0, nontraversable));
  return img;
}

void overlay_path(ImageU8& image, const GlobalBevMap& map, const std::vector<Cell>& cells, Rgb color) {
  if (!image.same_shape(3, map.rows(), map.cols())) throw std::invalid_argument("overlay_path: image/map size mismatch");
  for (const auto& cell : cells) put(image, map.rows() - 1 - cell.row, cell.col, color);
}

}  // namespace cotmap
