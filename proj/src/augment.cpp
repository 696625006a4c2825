#include "cotmap/augment.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cotmap {

namespace {

void check_dims(const CotLabelImage& label, const MaskSet& masks) {
  if (masks.count() > 0 && (masks.height() != label.height() || masks.width() != label.width()))
    throw std::invalid_argument("masks and label image differ in size");
}

}  // namespace

CotLabelImage extend_labels_by_masks(const CotLabelImage& label, const MaskSet& masks, const CotParams& params,
                                     ExtendReport* report) {
  check_dims(label, masks);
  ExtendReport rep;
  CotLabelImage out = label;
  const int h = label.height(), w = label.width();
  for (int i = 0; i < masks.count(); ++i) {
    double path_sum = 0.0, over_sum = 0.0;
    std::size_t path_n = 0, over_n = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!masks.in(i, y, x)) continue;
        const Provenance p = label.prov(y, x);
        if (p == Provenance::Path) {
          path_sum += label.value.at(y, x);
          ++path_n;
        } else if (p == Provenance::Overhead) {
          over_sum += label.value.at(y, x);
          ++over_n;
        }
      }
    if (path_n == 0 && over_n == 0) continue;
    double fill;
    if (path_n > 0 && over_n > 0) {
      ++rep.masks_conflict;
      fill = params.nontraversable_cot;
      spdlog::debug("mask {} touches path and overhead labels; marked non-traversable", i);
    } else if (path_n > 0) {
      ++rep.masks_path;
      fill = path_sum / double(path_n);
    } else {
      ++rep.masks_overhead;
      fill = over_sum / double(over_n);
    }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (masks.in(i, y, x) && out.value.at(y, x) == kUnknownCot && label.value.at(y, x) == kUnknownCot)
          out.set(y, x, static_cast<float>(fill), Provenance::MaskExtended);
  }
  if (report) *report = rep;
  return out;
}

DecisionBoundary select_decision_boundary(const std::vector<double>& labeled, const std::vector<double>& unlabeled,
                                          const BoundaryPolicy& policy) {
  (void)unlabeled;
  if (policy.kind == BoundaryPolicy::Kind::Fixed) {
    if (!(policy.theta > 0.0)) throw std::invalid_argument("decision boundary: theta must be positive");
    return {policy.theta};
  }
  if (labeled.empty()) throw std::invalid_argument("decision boundary: no labeled SE values");
  const double n = double(labeled.size());
  const double mean = std::accumulate(labeled.begin(), labeled.end(), 0.0) / n;
  double var = 0.0;
  for (double v : labeled) var += (v - mean) * (v - mean);
  const double theta = mean + policy.kappa * std::sqrt(var / n);
  // All-zero labeled errors would give theta = 0; keep the boundary strictly positive.
  return {std::max(theta, std::numeric_limits<double>::min())};
}

CotLabelImage label_nontraversable_by_confidence(const CotLabelImage& label, const MaskSet& masks,
                                                 const std::vector<double>& se, const DecisionBoundary& boundary,
                                                 const CotParams& params) {
  check_dims(label, masks);
  if (se.size() != static_cast<std::size_t>(masks.count()))
    throw std::invalid_argument("SE values are not aligned with masks");
  CotLabelImage out = label;
  for (int i = 0; i < masks.count(); ++i) {
    if (std::isnan(se[std::size_t(i)]) || !(se[std::size_t(i)] > boundary.theta)) continue;
    for (int y = 0; y < label.height(); ++y)
      for (int x = 0; x < label.width(); ++x)
        if (masks.in(i, y, x) && out.value.at(y, x) == kUnknownCot)
          out.set(y, x, static_cast<float>(params.nontraversable_cot), Provenance::Confidence);
  }
  return out;
}

CotLabelImage fill_unknown_nontraversable(const CotLabelImage& label, const CotParams& params) {
  CotLabelImage out = label;
  for (int y = 0; y < label.height(); ++y)
    for (int x = 0; x < label.width(); ++x)
      if (out.value.at(y, x) == kUnknownCot)
        out.set(y, x, static_cast<float>(params.nontraversable_cot), Provenance::Assumed);
  return out;
}

std::vector<std::uint8_t> traversable_pixels(const CotLabelImage& label, const CotParams& params) {
  std::vector<std::uint8_t> m(label.value.data.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const float v = label.value.data[i];
    m[i] = v > kUnknownCot && v < params.nontraversable_cot;
  }
  return m;
}

MaskLabelState mask_label_state(const CotLabelImage& label, const MaskSet& masks, int index, const CotParams& params) {
  check_dims(label, masks);
  bool nontrav = false;
  const auto plane = masks.masks.channel(index);
  for (std::size_t p = 0; p < plane.size(); ++p) {
    if (!plane[p]) continue;
    const float v = label.value.data[p];
    if (v > kUnknownCot && v < params.nontraversable_cot) return MaskLabelState::Traversable;
    if (v >= params.nontraversable_cot) nontrav = true;
  }
  return nontrav ? MaskLabelState::NonTraversable : MaskLabelState::Unlabeled;
}

}  // namespace cotmap
