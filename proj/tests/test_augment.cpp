#include "cotmap/augment.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cotmap;

namespace {

MaskSet one_mask(int h, int w, int y0, int y1, int x0, int x1) {
  MaskSet m(h, w);
  std::vector<std::uint8_t> plane(std::size_t(h) * std::size_t(w), 0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) plane[std::size_t(y) * std::size_t(w) + std::size_t(x)] = 1;
  m.add(plane);
  return m;
}

}  // namespace

TEST_CASE("extend_labels_by_masks examples") {
  const CotParams p;
  CotLabelImage l(4, 6);
  for (int x = 0; x < 6; ++x) l.set(3, x, 1.2f, Provenance::Path);
  const auto ext = extend_labels_by_masks(l, one_mask(4, 6, 0, 4, 0, 6), p);
  for (float v : ext.value.data) CHECK(v == 1.2f);
  CHECK(ext.prov(0, 0) == Provenance::MaskExtended);
  CHECK(ext.prov(3, 0) == Provenance::Path);

  CotLabelImage l2(4, 6);
  l2.set(0, 0, 1.0f, Provenance::Path);
  const auto disjoint = extend_labels_by_masks(l2, one_mask(4, 6, 2, 4, 2, 6), p);
  CHECK(disjoint == l2);

  // Half the labeled part of the mask at 1.0, half at 2.0: the rest becomes 1.5.
  CotLabelImage l3(4, 4);
  l3.set(0, 0, 1.0f, Provenance::Path);
  l3.set(0, 1, 1.0f, Provenance::Path);
  l3.set(0, 2, 2.0f, Provenance::Path);
  l3.set(0, 3, 2.0f, Provenance::Path);
  const auto half = extend_labels_by_masks(l3, one_mask(4, 4, 0, 4, 0, 4), p);
  for (int y = 1; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(half.value.at(y, x) == 1.5f);
  CHECK(half.value.at(0, 0) == 1.0f);
  CHECK(half.value.at(0, 3) == 2.0f);

  // Path and overhead in one mask: non-traversable.
  CotLabelImage l4(2, 2);
  l4.set(0, 0, 1.0f, Provenance::Path);
  l4.set(0, 1, 10.0f, Provenance::Overhead);
  ExtendReport rep;
  const auto conflict = extend_labels_by_masks(l4, one_mask(2, 2, 0, 2, 0, 2), p, &rep);
  CHECK(rep.masks_conflict == 1);
  CHECK(conflict.value.at(1, 1) == 10.0f);
  CHECK(conflict.value.at(0, 0) == 1.0f);
}

TEST_CASE("mask extension recovers uniform path values and never overwrites") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0, 1);
  const CotParams p;
  for (int trial = 0; trial < 50; ++trial) {
    CotLabelImage l(10, 12);
    for (auto& v : l.value.data)
      if (U(rng) < 0.2) v = float(0.5 + U(rng));
    for (std::size_t i = 0; i < l.value.data.size(); ++i)
      if (l.value.data[i] > 0) l.provenance.data[i] = std::uint8_t(Provenance::Path);
    MaskSet m(10, 12);
    for (int k = 0; k < 3; ++k) {
      std::vector<std::uint8_t> plane(120);
      for (auto& b : plane) b = U(rng) < 0.4;
      plane[0] = 1;
      m.add(plane);
    }
    const auto ext = extend_labels_by_masks(l, m, p);
    CHECK(coverage(ext) >= coverage(l));
    for (std::size_t i = 0; i < l.value.data.size(); ++i)
      if (l.value.data[i] > 0) CHECK(ext.value.data[i] == l.value.data[i]);
  }
}

TEST_CASE("decision boundary examples") {
  CHECK(select_decision_boundary({0.4, 0.4, 0.4}, {}).theta == doctest::Approx(0.4).epsilon(1e-12));
  // mean 1, population std 0.1
  const auto b = select_decision_boundary({0.9, 1.1}, {9.0});
  CHECK(b.theta == doctest::Approx(1.3).epsilon(1e-12));
  BoundaryPolicy fixed;
  fixed.kind = BoundaryPolicy::Kind::Fixed;
  fixed.theta = 0.25;
  CHECK(select_decision_boundary({}, {}, fixed).theta == 0.25);
  CHECK_THROWS(select_decision_boundary({}, {}));
  CHECK(select_decision_boundary({0.0, 0.0}, {}).theta > 0.0);
}

TEST_CASE("decision boundary separates a bimodal mixture") {
  // Generator: familiar masks near 0.5, novel masks near 5.0; labeled SEs come from the familiar mode.
  std::mt19937_64 rng(31);
  std::normal_distribution<double> lo(0.5, 0.1), hi(5.0, 1.0);
  std::vector<double> labeled;
  for (int i = 0; i < 200; ++i) labeled.push_back(std::abs(lo(rng)));
  std::vector<double> unlabeled;
  std::vector<bool> novel;
  for (int i = 0; i < 1000; ++i) {
    const bool n = i % 3 == 0;
    unlabeled.push_back(std::abs(n ? hi(rng) : lo(rng)));
    novel.push_back(n);
  }
  const double theta = select_decision_boundary(labeled, unlabeled).theta;
  int right = 0;
  for (std::size_t i = 0; i < unlabeled.size(); ++i) right += (unlabeled[i] > theta) == novel[i];
  CHECK(double(right) / double(unlabeled.size()) >= 0.95);
}

TEST_CASE("confidence labeling rules") {
  const CotParams p;
  const double theta = 0.2;
  CotLabelImage l(3, 3);
  const auto m = one_mask(3, 3, 0, 3, 0, 3);
  const auto hot = label_nontraversable_by_confidence(l, m, {2 * theta}, {theta}, p);
  for (float v : hot.value.data) CHECK(v == 10.0f);
  for (auto pr : hot.provenance.data) CHECK(pr == std::uint8_t(Provenance::Confidence));
  CHECK(label_nontraversable_by_confidence(l, m, {theta / 2}, {theta}, p) == l);
  CHECK(label_nontraversable_by_confidence(l, m, {theta}, {theta}, p) == l);
  CHECK(label_nontraversable_by_confidence(l, m, {std::nan("")}, {theta}, p) == l);

  CotLabelImage lp(3, 3);
  lp.set(1, 1, 0.8f, Provenance::Path);
  const auto mixed = label_nontraversable_by_confidence(lp, m, {2 * theta}, {theta}, p);
  CHECK(mixed.value.at(1, 1) == 0.8f);
  CHECK(mixed.value.at(0, 0) == 10.0f);
  CHECK(coverage(mixed) >= coverage(lp));
  CHECK_THROWS(label_nontraversable_by_confidence(lp, m, {}, {theta}, p));

  const auto filled = fill_unknown_nontraversable(lp, p);
  CHECK(coverage(filled) == 1.0);
  CHECK(filled.value.at(1, 1) == 0.8f);
}

TEST_CASE("mask label state and traversable pixels") {
  const CotParams p;
  CotLabelImage l(2, 3);
  l.set(0, 0, 1.0f, Provenance::Path);
  l.set(1, 2, 10.0f, Provenance::Overhead);
  MaskSet m(2, 3);
  m.add({1, 1, 0, 0, 0, 0});
  m.add({0, 0, 0, 0, 1, 1});
  m.add({0, 1, 0, 0, 1, 0});
  CHECK(mask_label_state(l, m, 0, p) == MaskLabelState::Traversable);
  CHECK(mask_label_state(l, m, 1, p) == MaskLabelState::NonTraversable);
  CHECK(mask_label_state(l, m, 2, p) == MaskLabelState::Unlabeled);
  CHECK(traversable_pixels(l, p) == std::vector<std::uint8_t>{1, 0, 0, 0, 0, 0});
}

TEST_CASE("oracle masks and majority pooling") {
  Keyframe kf;
  kf.surface = ImageU8(1, 8, 8, kSurfaceTerrainBase);
  for (int y = 0; y < 8; ++y)
    for (int x = 4; x < 8; ++x) kf.surface.at(y, x) = kSurfaceTerrainBase + 1;
  kf.surface.at(0, 0) = kSurfaceNone;
  kf.surface.at(7, 0) = kSurfaceObstacleBase;  // a single pixel: below the size floor
  const auto ms = OracleMaskProvider(8).masks_for(kf);
  REQUIRE(ms.count() == 2);
  ms.validate();
  CHECK(ms.pixel_count(0) + ms.pixel_count(1) == 62u);
  for (int i = 0; i < 2; ++i) CHECK(surface_is_terrain(std::uint8_t(ms.source[std::size_t(i)])));

  ImageU8 masks(1, 4, 4, 0);
  masks.at(0, 0) = masks.at(0, 1) = 1;  // 2 of 4 in the top-left block: inside
  masks.at(2, 2) = 1;                   // 1 of 4: outside
  const auto d = downsample_masks(masks, 2);
  CHECK(d.same_shape(1, 2, 2));
  CHECK(d.at(0, 0) == 1);
  CHECK(d.at(1, 1) == 0);
  CHECK(d.at(0, 1) == 0);
}
