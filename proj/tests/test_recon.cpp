#include "cotmap/recon.hpp"

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
  return f;
}

MaskSet full_mask(int h, int w) {
  MaskSet m(h, w);
  m.add(std::vector<std::uint8_t>(std::size_t(h) * std::size_t(w), 1));
  return m;
}

}  // namespace

TEST_CASE("mask SE example") {
  ReconstructionModel::Activations a;
  a.l1 = Field(2, 2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      a.l1.at(0, y, x) = 1.0;
      a.l1.at(1, y, x) = 2.0;  // channel sum 3
    }
  a.l2 = Field(1, 1, 1, 1.0);
  const auto se = mask_squared_errors(a, full_mask(8, 8));
  REQUIRE(se.size() == 1u);
  CHECK(se[0] == 4.0);

  a.l2.at(0, 0, 0) = 3.0;
  CHECK(mask_squared_errors(a, full_mask(8, 8))[0] == 0.0);

  // A mask too small to survive pooling at the coarsest latent has no SE.
  MaskSet tiny(8, 8);
  std::vector<std::uint8_t> plane(64, 0);
  plane[0] = plane[1] = plane[8] = plane[9] = 1;
  tiny.add(plane);
  CHECK(std::isnan(mask_squared_errors(a, tiny)[0]));
}

TEST_CASE("perfect reconstruction has zero main loss") {
  ReconstructionModel m(2, 3, 1);
  auto& p = m.params();
  std::fill(p.values.begin(), p.values.end(), 0.0);
  const auto& out_bias = p.block("dec1a.b");
  const double c[4] = {0.2, 0.4, 0.6, 0.8};
  for (int i = 0; i < 4; ++i) p.values[out_bias.offset + std::size_t(i)] = c[i];
  Field in(4, 8, 8);
  for (int ch = 0; ch < 4; ++ch)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) in.at(ch, y, x) = c[ch];
  const auto L = reconstruction_losses(m, in, std::vector<std::uint8_t>(64, 1), full_mask(8, 8));
  CHECK(L.main == 0.0);
  CHECK(L.aux == 0.0);  // all latents are zero
  CHECK(L.total == 0.0);
}

TEST_CASE("loss gradients match central differences") {
  ReconstructionModel m(3, 4, 12);
  // Zero biases put dead-ReLU units exactly on the kink; move them off it.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> B(-0.1, 0.1);
  for (const auto& blk : m.params().blocks)
    if (blk.name.ends_with(".b"))
      for (std::size_t i = blk.offset; i < blk.offset + blk.size; ++i) m.params().values[i] = B(rng);
  const Field in = random_input(8, 8, 4);
  std::vector<std::uint8_t> trav(64, 0);
  for (int i = 0; i < 40; ++i) trav[std::size_t(i)] = 1;
  MaskSet masks(8, 8);
  std::vector<std::uint8_t> a(64, 0), b(64, 0);
  for (int i = 0; i < 64; ++i) (i % 8 < 4 ? a : b)[std::size_t(i)] = 1;
  masks.add(a);
  masks.add(b);

  std::vector<double> grad;
  reconstruction_losses(m, in, trav, masks, {}, &grad, Exec::Serial);
  auto& x = m.params().values;
  std::size_t checked = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double num = oracle::central_difference(x, i, 1e-6, [&] {
      return reconstruction_losses(m, in, trav, masks, {}, nullptr, Exec::Serial).total;
    });
    worst = std::max(worst, oracle::relative_error(grad[i], num));
    ++checked;
  }
  CHECK(checked == x.size());
  CHECK(worst < 1e-4);
}

TEST_CASE("training reconstructs a constant image") {
  ReconSample s;
  s.input = Field(4, 8, 8);
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) s.input.at(c, y, x) = 0.25 + 0.15 * c;
  s.traversable.assign(64, 1);
  s.masks = MaskSet(8, 8);
  ReconTrainConfig cfg;
  cfg.c1 = 4;
  cfg.c2 = 4;
  cfg.epochs = 400;
  cfg.lr = 0.01;
  cfg.optimizer = OptimizerKind::AdamW;
  const auto r = train_reconstruction_model({s}, cfg, 3, Exec::Serial);
  REQUIRE(r.epoch_main.size() == 401u);
  CHECK(r.epoch_main.back() < 1e-3 * r.epoch_main.front());

  cfg.epochs = 0;
  const auto z = train_reconstruction_model({s}, cfg, 3, Exec::Serial);
  CHECK(z.model.params().values == ReconstructionModel(4, 4, 3).params().values);

  cfg.epochs = 3;
  const auto p1 = train_reconstruction_model({s, s}, cfg, 8, Exec::Serial);
  const auto p2 = train_reconstruction_model({s, s}, cfg, 8, Exec::Parallel);
  CHECK(p1.model.params().values == p2.model.params().values);

  ReconSample empty = s;
  empty.traversable.assign(64, 0);
  CHECK_THROWS(train_reconstruction_model({empty}, cfg, 3));
}

TEST_CASE("forward is identical across execution modes") {
  ReconstructionModel m(4, 8, 2);
  const Field in = random_input(16, 24, 6);
  const auto s = m.forward(in, Exec::Serial), p = m.forward(in, Exec::Parallel);
  CHECK(s.out == p.out);
  CHECK(s.l1 == p.l1);
  CHECK(s.l2 == p.l2);
  CHECK_THROWS(m.forward(random_input(12, 16, 1)));
}
