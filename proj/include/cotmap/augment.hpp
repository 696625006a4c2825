#pragma once

#include "cotmap/cotlabel.hpp"
#include "cotmap/masks.hpp"
#include "cotmap/render.hpp"

#include <cstddef>
#include <vector>

namespace cotmap {

struct ExtendReport {
  int masks_path = 0;
  int masks_overhead = 0;
  int masks_conflict = 0;  ///< hit both kinds; resolved as non-traversable
};

/// Fills unknown pixels of every mask that touches path or overhead labels with the
/// mean label over that intersection. Means are taken over the input labels only, so
/// mask order matters only where masks overlap (the earlier mask wins).
CotLabelImage extend_labels_by_masks(const CotLabelImage& label, const MaskSet& masks, const CotParams& params,
                                     ExtendReport* report = nullptr);

struct BoundaryPolicy {
  enum class Kind { KappaSigma, Fixed } kind = Kind::KappaSigma;
  double kappa = 3.0;
  double theta = 0.0;  ///< used by Kind::Fixed
};

struct DecisionBoundary {
  double theta = 0.0;
};

/// Kappa-sigma: theta = mean + kappa * std (population std) of the labeled SEs.
/// The unlabeled list is accepted for policies that look at it; kappa-sigma ignores it.
DecisionBoundary select_decision_boundary(const std::vector<double>& labeled, const std::vector<double>& unlabeled,
                                          const BoundaryPolicy& policy = {});

/// Unknown pixels of masks with SE > theta become non-traversable. NaN SEs (masks
/// that vanish at a latent resolution) are skipped.
CotLabelImage label_nontraversable_by_confidence(const CotLabelImage& label, const MaskSet& masks,
                                                 const std::vector<double>& se, const DecisionBoundary& boundary,
                                                 const CotParams& params);

/// Every remaining unknown pixel becomes non-traversable.
CotLabelImage fill_unknown_nontraversable(const CotLabelImage& label, const CotParams& params);

/// Pixels whose label is a traversable COT (0 < value < nontraversable_cot).
std::vector<std::uint8_t> traversable_pixels(const CotLabelImage& label, const CotParams& params);

enum class MaskLabelState { Unlabeled, Traversable, NonTraversable };

/// How a mask relates to the labels: any traversable pixel makes it Traversable,
/// otherwise any non-traversable pixel makes it NonTraversable.
MaskLabelState mask_label_state(const CotLabelImage& label, const MaskSet& masks, int index, const CotParams& params);

}  // namespace cotmap
