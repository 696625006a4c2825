#pragma once

#include "cotmap/bev.hpp"
#include "cotmap/plan.hpp"
#include "cotmap/simworld.hpp"

namespace cotmap {

inline constexpr double kColormapLow = 0.5;
inline constexpr double kColormapHigh = 2.0;

/// Perceptual ramp over [0.5, 2.0]; unknown (<= 0) is white and values at or above
/// `nontraversable` are black.
Rgb cot_color(double cot, double nontraversable);

/// 1 x H x W COT image to 3 x H x W colors.
ImageU8 colorize_cot(const ImageF& cot, double nontraversable);

/// Global map to colors with +y pointing up (row 0 of the image is the top row of the map).
ImageU8 colorize_map(const GlobalBevMap& map, double nontraversable);

/// Paints path cells onto an image produced by colorize_map.
void overlay_path(ImageU8& image, const GlobalBevMap& map, const std::vector<Cell>& cells, Rgb color);

}  // namespace cotmap
