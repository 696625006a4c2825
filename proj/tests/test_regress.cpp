#include "cotmap/regress.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cotmap;

namespace {

Field random_input(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0, 1);
  Field f(4, h, w);
  for (auto& v : f.data) v = U(rng);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) f.at(3, y, x) = 0.2 + U(rng);
  return f;
}

ImageF image(int h, int w, float v) { return ImageF(1, h, w, v); }

int boundary_count(const ImageF& z) {
  int n = 0;
  for (int y = 0; y < z.height; ++y)
    for (int x = 0; x + 1 < z.width; ++x) n += z.at(y, x) > 0 && z.at(y, x + 1) > 0 && z.at(y, x) != z.at(y, x + 1);
  return n;
}

MaskSet left_half(int h, int w) {
  MaskSet m(h, w);
  std::vector<std::uint8_t> plane(std::size_t(h) * std::size_t(w), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w / 2; ++x) plane[std::size_t(y) * std::size_t(w) + std::size_t(x)] = 1;
  m.add(plane);
  return m;
}

}  // namespace

TEST_CASE("masked_mae examples") {
  const ImageF zero = image(2, 2, 0.0f);
  ImageF p = image(2, 2, 0.0f);
  p.data = {1.0f, 2.0f, 3.0f, 4.0f};
  CHECK(masked_mae(zero, p) == 0.0);
  CHECK(masked_mae(p, p) == 0.0);

  ImageF z = image(2, 2, 0.0f);
  z.data = {1.0f, 1.0f, 0.0f, 0.0f};
  ImageF q = image(2, 2, 0.0f);
  q.data = {1.5f, 0.5f, 9.0f, 7.0f};
  CHECK(masked_mae(z, q) == 0.25);
  CHECK(masked_mae(z, q, MaeNormalization::LabeledPixels) == 0.5);
  CHECK(masked_mse(z, q) == 0.25);
  CHECK_THROWS(masked_mae(z, image(2, 3, 0.0f)));
}

TEST_CASE("masked_mae ignores predictions at unknown pixels") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0, 2);
  for (int t = 0; t < 100; ++t) {
    ImageF z = image(8, 8, 0.0f), p = image(8, 8, 0.0f);
    for (std::size_t i = 0; i < z.data.size(); ++i) {
      z.data[i] = U(rng) < 0.5 ? 0.0f : float(U(rng) + 0.1);
      p.data[i] = float(U(rng));
    }
    const double base = masked_mae(z, p);
    ImageF p2 = p;
    for (std::size_t i = 0; i < z.data.size(); ++i)
      if (z.data[i] == 0.0f) p2.data[i] = float(U(rng) * 100);
    CHECK(masked_mae(z, p2) == base);
  }
}

TEST_CASE("regressor loss gradient matches central differences") {
  const Field in = random_input(8, 8, 1);
  PatchMlpRegressor m(6, 1, 21);
  const Field F = compute_features(in, 1);
  m.fit_normalization({F});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0, 2);
  ImageF z = image(8, 8, 0.0f);
  for (auto& v : z.data) v = U(rng) < 0.3 ? 0.0f : float(0.2 + U(rng));
  const ImageF pred = m.predict_features(F);
  for (std::size_t i = 0; i < z.data.size(); ++i)
    if (std::abs(z.data[i] - pred.data[i]) < 1e-6) z.data[i] = 0.0f;  // subgradient points

  std::vector<double> grad;
  m.loss_on_features(F, z, 64.0, &grad);
  auto& x = m.params().values;
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& b : m.params().blocks) {
    if (!b.trainable) continue;
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
      const double num = oracle::central_difference(x, i, 1e-7, [&] { return m.loss_on_features(F, z, 64.0, nullptr); });
      worst = std::max(worst, oracle::relative_error(grad[i], num, 1e-4));  // floor above roundoff of a zero gradient
      ++checked;
    }
  }
  CHECK(checked > 80u);
  CHECK(worst < 1e-4);

  // The loss equals the MAE of the model's own prediction.
  CHECK(std::abs(m.loss_on_features(F, z, 64.0, nullptr) - masked_mae(z, m.predict_features(F))) < 1e-6);
}

TEST_CASE("predictions are nonnegative and zero-init predicts zero") {
  const Field in = random_input(10, 12, 3);
  for (std::uint64_t s = 0; s < 10; ++s) {
    PatchMlpRegressor m(8, 2, s);
    for (float v : m.predict(in).data) CHECK(v >= 0.0f);
  }
  const PatchMlpRegressor zero(8, 2, 0, PatchMlpRegressor::Init::Zero);
  for (float v : predict_cot_image(zero, in).data) CHECK(v == 0.0f);
}

TEST_CASE("features: serial equals parallel, invalid depth handled") {
  Field in = random_input(12, 16, 7);
  for (int x = 0; x < 16; ++x) in.at(3, 0, x) = 0.0;  // a sky row
  CHECK(compute_features(in, 2, Exec::Serial) == compute_features(in, 2, Exec::Parallel));
  const Field F = compute_features(in, 2);
  for (double v : F.data) CHECK(std::isfinite(v));

  // Constant image on a depth ramp along x.
  Field ramp(4, 6, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      for (int c = 0; c < 3; ++c) ramp.at(c, y, x) = 0.5;
      ramp.at(3, y, x) = 1.0 + 0.5 * x;
    }
  const Field R = compute_features(ramp, 1);
  CHECK(R.at(0, 3, 3) == doctest::Approx(0.5));
  CHECK(R.at(1, 3, 3) == doctest::Approx(0.0));
  CHECK(R.at(8, 3, 3) == doctest::Approx(0.5));
  CHECK(R.at(9, 3, 3) == doctest::Approx(0.0));
}

TEST_CASE("copy_paste_augment examples") {
  TrainBatch b;
  b.inputs = {random_input(6, 8, 1), random_input(6, 8, 2)};
  b.labels = {image(6, 8, 0.7f), image(6, 8, 1.3f)};
  const std::vector<MaskSet> masks{left_half(6, 8), left_half(6, 8)};
  const auto same = copy_paste_augment(b, masks, 0, 1);
  CHECK(same.labels == b.labels);
  CHECK(same.inputs == b.inputs);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto out = copy_paste_augment(b, masks, 1, seed);
    int boundaries = 0;
    for (const auto& z : out.labels) boundaries += boundary_count(z);
    CHECK(boundaries > 0);
    CHECK(copy_paste_augment(b, masks, 1, seed).labels == out.labels);
  }

  TrainBatch unlabeled = b;
  for (auto& z : unlabeled.labels)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 4; ++x) z.at(y, x) = 0.0f;
  const auto skipped = copy_paste_augment(unlabeled, masks, 3, 5);
  CHECK(skipped.labels == unlabeled.labels);
  CHECK(skipped.inputs == unlabeled.inputs);
}

TEST_CASE("hflip_augment examples") {
  TrainBatch b;
  b.inputs = {random_input(5, 7, 1), random_input(5, 7, 2)};
  b.labels = {image(5, 7, 0.0f), image(5, 7, 0.0f)};
  for (int x = 0; x < 7; ++x) b.labels[0].at(2, x) = float(x + 1);
  const auto none = hflip_augment(b, 0.0, 3);
  CHECK(none.inputs == b.inputs);
  CHECK(none.labels == b.labels);
  const auto once = hflip_augment(b, 1.0, 3);
  for (int x = 0; x < 7; ++x) CHECK(once.labels[0].at(2, 6 - x) == b.labels[0].at(2, x));
  for (int c = 0; c < 4; ++c) CHECK(once.inputs[1].at(c, 4, 0) == b.inputs[1].at(c, 4, 6));
  const auto twice = hflip_augment(once, 1.0, 9);
  CHECK(twice.inputs == b.inputs);
  CHECK(twice.labels == b.labels);
}

TEST_CASE("train_regressor") {
  std::vector<RegressSample> data;
  for (int i = 0; i < 6; ++i) {
    RegressSample s;
    s.input = random_input(8, 8, std::uint64_t(i));
    s.label = image(8, 8, 1.3f);
    s.masks = left_half(8, 8);
    data.push_back(s);
  }
  RegressorConfig cfg;
  cfg.epochs = 0;
  cfg.hidden = 8;
  cfg.seed = 4;
  const auto init = train_regressor(data, LabelMode::SL, cfg);
  const PatchMlpRegressor fresh(8, cfg.feature_radius, 4);
  for (const auto& b : fresh.params().blocks) {
    if (!b.trainable) continue;
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i)
      CHECK(init.model.params().values[i] == fresh.params().values[i]);
  }
  CHECK(init.epoch_loss.empty());

  cfg.epochs = 60;
  cfg.lr = 0.02;
  const auto trained = train_regressor(data, LabelMode::SL, cfg);
  CHECK(trained.epoch_loss.back() < trained.epoch_loss.front());
  const ImageF pred = trained.model.predict(random_input(8, 8, 99));
  double mean = 0, sq = 0;
  for (float v : pred.data) mean += v / 64.0;
  for (float v : pred.data) sq += (v - mean) * (v - mean) / 64.0;
  CHECK(mean > 0.0);
  CHECK(std::sqrt(sq) < 0.1 * mean);

  // Bit-reproducible across execution modes.
  cfg.epochs = 3;
  const auto s = train_regressor(data, LabelMode::C_SAM, cfg, Exec::Serial);
  const auto p = train_regressor(data, LabelMode::C_SAM, cfg, Exec::Parallel);
  CHECK(s.model.params().values == p.model.params().values);

  std::vector<RegressSample> empty = data;
  for (auto& e : empty) e.label = image(8, 8, 0.0f);
  CHECK_THROWS(train_regressor(empty, LabelMode::SL, cfg));
  CHECK_THROWS(train_regressor({}, LabelMode::SL, cfg));
}

TEST_CASE("label mode names") {
  for (auto m : {LabelMode::SL, LabelMode::SL_SAM, LabelMode::UN_SAM, LabelMode::C_SAM})
    CHECK(parse_label_mode(to_string(m)) == m);
  CHECK(parse_label_mode("C-SAM") == LabelMode::C_SAM);
  CHECK(!parse_label_mode("sam"));
}
