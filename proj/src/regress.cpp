#include "cotmap/regress.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cotmap {

namespace {

enum Block { NormMean, NormStd, W1, B1, W2, B2 };

void check_same(const ImageF& a, const ImageF& b) {
  if (a.channels != b.channels || a.height != b.height || a.width != b.width)
    throw std::invalid_argument("label and prediction shapes differ");
}

// Summed-area table with a zero border: S(y, x) = sum over [0, y) x [0, x).
// Only pixels with valid depth contribute; power 0 counts them.
std::vector<double> integral(const Field& f, int c, int power) {
  const int h = f.height, w = f.width;
  std::vector<double> s(std::size_t(h + 1) * std::size_t(w + 1), 0.0);
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      if (f.at(3, y, x) > 0.0) {
        const double v = f.at(c, y, x);
        row += power == 0 ? 1.0 : power == 1 ? v : v * v;
      }
      s[std::size_t(y + 1) * std::size_t(w + 1) + std::size_t(x + 1)] =
          s[std::size_t(y) * std::size_t(w + 1) + std::size_t(x + 1)] + row;
    }
  }
  return s;
}

}  // namespace

std::string to_string(LabelMode m) {
  switch (m) {
    case LabelMode::SL: return "sl";
    case LabelMode::SL_SAM: return "sl-sam";
    case LabelMode::UN_SAM: return "un-sam";
    case LabelMode::C_SAM: return "c-sam";
  }
  return "?";
}

std::optional<LabelMode> parse_label_mode(const std::string& s) {
  std::string l(s);
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  for (auto m : {LabelMode::SL, LabelMode::SL_SAM, LabelMode::UN_SAM, LabelMode::C_SAM})
    if (to_string(m) == l) return m;
  return std::nullopt;
}

void TrainBatch::validate() const {
  if (inputs.size() != labels.size()) throw std::invalid_argument("batch: inputs and labels differ in count");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].channels != 4 || !labels[i].same_shape(1, inputs[i].height, inputs[i].width))
      throw std::invalid_argument("batch: inconsistent shapes at image " + std::to_string(i));
    for (float z : labels[i].data)
      if (!(z >= 0.0f)) throw std::invalid_argument("batch: labels must be nonnegative");
  }
}

double masked_mae(const std::vector<ImageF>& Z, const std::vector<ImageF>& P, MaeNormalization norm) {
  if (Z.size() != P.size()) throw std::invalid_argument("masked_mae: batch sizes differ");
  double sum = 0.0;
  std::size_t total = 0, labeled = 0;
  for (std::size_t b = 0; b < Z.size(); ++b) {
    check_same(Z[b], P[b]);
    total += Z[b].data.size();
    for (std::size_t i = 0; i < Z[b].data.size(); ++i) {
      if (Z[b].data[i] == kUnknownCot) continue;
      ++labeled;
      sum += std::abs(double(Z[b].data[i]) - double(P[b].data[i]));
    }
  }
  const std::size_t denom = norm == MaeNormalization::TotalPixels ? total : labeled;
  return denom ? sum / double(denom) : 0.0;
}

double masked_mae(const ImageF& Z, const ImageF& P, MaeNormalization norm) {
  return masked_mae(std::vector<ImageF>{Z}, std::vector<ImageF>{P}, norm);
}

double masked_mse(const ImageF& truth, const ImageF& pred) {
  check_same(truth, pred);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < truth.data.size(); ++i) {
    if (truth.data[i] == kUnknownCot) continue;
    const double d = double(truth.data[i]) - double(pred.data[i]);
    sum += d * d;
    ++n;
  }
  return n ? sum / double(n) : 0.0;
}

Field compute_features(const Field& input, int radius, Exec exec) {
  if (input.channels != 4) throw std::invalid_argument("compute_features: expected 4 x H x W input");
  if (radius < 0) throw std::invalid_argument("compute_features: radius must be >= 0");
  const int h = input.height, w = input.width;
  Field out(kFeatureCount, h, w);
  // Patch statistics use only neighbours whose depth validity matches the centre, so
  // sky does not bleed into terrain along the horizon. Full sums come from a second
  // table set that ignores validity.
  Field all = input;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) all.at(3, y, x) = 1.0;
  std::vector<std::vector<double>> vs(4), vq(4), fs(4), fq(4);
  for (int c = 0; c < 3; ++c) {
    vs[std::size_t(c)] = integral(input, c, 1);
    vq[std::size_t(c)] = integral(input, c, 2);
    fs[std::size_t(c)] = integral(all, c, 1);
    fq[std::size_t(c)] = integral(all, c, 2);
  }
  vs[3] = integral(input, 3, 1);
  vq[3] = integral(input, 3, 2);
  const std::vector<double> vn = integral(input, 0, 0);
  const auto W1 = std::size_t(w + 1);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius), y1 = std::min(h, y + radius + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - radius), x1 = std::min(w, x + radius + 1);
      auto box = [&](const std::vector<double>& t) {
        return t[std::size_t(y1) * W1 + std::size_t(x1)] - t[std::size_t(y0) * W1 + std::size_t(x1)] -
               t[std::size_t(y1) * W1 + std::size_t(x0)] + t[std::size_t(y0) * W1 + std::size_t(x0)];
      };
      const bool valid = input.at(3, y, x) > 0.0;
      const double n_valid = box(vn);
      const double n = valid ? n_valid : double((y1 - y0) * (x1 - x0)) - n_valid;
      for (int c = 0; c < 4; ++c) {
        const auto cs = std::size_t(c);
        double sum = 0.0, sq = 0.0;  // depth is zero on invalid pixels
        if (valid) {
          sum = box(vs[cs]);
          sq = box(vq[cs]);
        } else if (c < 3) {
          sum = box(fs[cs]) - box(vs[cs]);
          sq = box(fq[cs]) - box(vq[cs]);
        }
        const double mean = sum / n;
        out.at(2 * c, y, x) = mean;
        out.at(2 * c + 1, y, x) = std::sqrt(std::max(0.0, sq / n - mean * mean));
      }
      const int xl = std::max(0, x - 1), xr = std::min(w - 1, x + 1);
      const int yu = std::max(0, y - 1), yd = std::min(h - 1, y + 1);
      // Central differences, one-sided next to invalid depth, zero with no valid
      // neighbour. Inverse depth is linear in image position on a plane, so its slope
      // separates ground from upright faces.
      auto slope = [&](int ya, int xa, int yb, int xb, int steps, bool inverse) {
        auto val = [&](int yy, int xx) {
          const double d = input.at(3, yy, xx);
          return inverse ? 1.0 / d : d;
        };
        const bool a = input.at(3, ya, xa) > 0.0, b = input.at(3, yb, xb) > 0.0, c = input.at(3, y, x) > 0.0;
        if (a && b && steps > 0) return (val(yb, xb) - val(ya, xa)) / double(steps);
        if (!c) return 0.0;
        if (b && (yb != y || xb != x)) return val(yb, xb) - val(y, x);
        if (a && (ya != y || xa != x)) return val(y, x) - val(ya, xa);
        return 0.0;
      };
      out.at(8, y, x) = slope(y, xl, y, xr, xr - xl, false);
      out.at(9, y, x) = slope(yu, x, yd, x, yd - yu, false);
      out.at(10, y, x) = slope(y, xl, y, xr, xr - xl, true);
      out.at(11, y, x) = slope(yu, x, yd, x, yd - yu, true);
    }
  }
  return out;
}

PatchMlpRegressor::PatchMlpRegressor(int hidden, int feature_radius, std::uint64_t seed, Init init)
    : hidden_(hidden), radius_(feature_radius) {
  if (hidden <= 0 || feature_radius < 0) throw std::invalid_argument("regressor: invalid hidden size or radius");
  params_.add("norm.mean", {kFeatureCount}, false, false);
  params_.add("norm.std", {kFeatureCount}, false, false);
  params_.add("fc1.w", {hidden, kFeatureCount}, true);
  params_.add("fc1.b", {hidden}, false);
  params_.add("fc2.w", {1, hidden}, true);
  params_.add("fc2.b", {1}, false);
  std::fill_n(params_.data(NormStd), kFeatureCount, 1.0);
  if (init == Init::Random) {
    std::mt19937_64 rng(seed);
    init_he_uniform(params_, W1, kFeatureCount, rng);
    init_he_uniform(params_, W2, hidden, rng);
    // Start the output unit in its active region so gradients reach it.
    params_.data(B2)[0] = 1.0;
  }
}

void PatchMlpRegressor::fit_normalization(const std::vector<Field>& features) {
  double* mean = params_.data(NormMean);
  double* sd = params_.data(NormStd);
  for (int f = 0; f < kFeatureCount; ++f) {
    double s = 0.0, q = 0.0;
    std::size_t n = 0;
    for (const auto& F : features)
      for (double v : F.channel(f)) {
        s += v;
        q += v * v;
        ++n;
      }
    if (n == 0) continue;
    mean[f] = s / double(n);
    sd[f] = std::max(1e-6, std::sqrt(std::max(0.0, q / double(n) - mean[f] * mean[f])));
  }
}

ImageF PatchMlpRegressor::predict_features(const Field& F) const {
  if (F.channels != kFeatureCount) throw std::invalid_argument("regressor: wrong feature count");
  ImageF out(1, F.height, F.width);
  const double* mean = params_.data(NormMean);
  const double* sd = params_.data(NormStd);
  const double* w1 = params_.data(W1);
  const double* b1 = params_.data(B1);
  const double* w2 = params_.data(W2);
  const double b2 = params_.data(B2)[0];
  double z[kFeatureCount];
  for (std::size_t p = 0; p < F.plane(); ++p) {
    for (int f = 0; f < kFeatureCount; ++f) z[f] = (F.data[std::size_t(f) * F.plane() + p] - mean[f]) / sd[f];
    double o = b2;
    for (int j = 0; j < hidden_; ++j) {
      double a = b1[j];
      for (int f = 0; f < kFeatureCount; ++f) a += w1[j * kFeatureCount + f] * z[f];
      if (a > 0.0) o += w2[j] * a;
    }
    out.data[p] = static_cast<float>(o > 0.0 ? o : 0.0);
  }
  return out;
}

double PatchMlpRegressor::loss_on_features(const Field& F, const ImageF& labels, double denom,
                                           std::vector<double>* grad) const {
  if (!labels.same_shape(1, F.height, F.width)) throw std::invalid_argument("regressor: label size mismatch");
  if (grad && grad->size() != params_.values.size()) grad->assign(params_.values.size(), 0.0);
  const double* mean = params_.data(NormMean);
  const double* sd = params_.data(NormStd);
  const double* w1 = params_.data(W1);
  const double* b1 = params_.data(B1);
  const double* w2 = params_.data(W2);
  const double b2 = params_.data(B2)[0];
  auto goff = [&](int b) { return grad->data() + params_.blocks[std::size_t(b)].offset; };
  std::vector<double> z(kFeatureCount), a(static_cast<std::size_t>(hidden_), 0.0);
  double loss = 0.0;
  for (std::size_t p = 0; p < F.plane(); ++p) {
    const double target = labels.data[p];
    if (target == double(kUnknownCot)) continue;
    for (int f = 0; f < kFeatureCount; ++f)
      z[std::size_t(f)] = (F.data[std::size_t(f) * F.plane() + p] - mean[f]) / sd[f];
    double o = b2;
    for (int j = 0; j < hidden_; ++j) {
      double s = b1[j];
      for (int f = 0; f < kFeatureCount; ++f) s += w1[j * kFeatureCount + f] * z[std::size_t(f)];
      a[std::size_t(j)] = s > 0.0 ? s : 0.0;
      o += w2[j] * a[std::size_t(j)];
    }
    const double pred = o > 0.0 ? o : 0.0;
    const double r = pred - target;
    loss += std::abs(r) / denom;
    if (!grad || !(o > 0.0) || r == 0.0) continue;
    const double g = (r > 0.0 ? 1.0 : -1.0) / denom;
    goff(B2)[0] += g;
    double* gw2 = goff(W2);
    double* gw1 = goff(W1);
    double* gb1 = goff(B1);
    for (int j = 0; j < hidden_; ++j) {
      gw2[j] += g * a[std::size_t(j)];
      if (!(a[std::size_t(j)] > 0.0)) continue;
      const double gh = g * w2[j];
      gb1[j] += gh;
      for (int f = 0; f < kFeatureCount; ++f) gw1[j * kFeatureCount + f] += gh * z[std::size_t(f)];
    }
  }
  return loss;
}

ImageF PatchMlpRegressor::predict(const Field& input, Exec exec) const {
  return predict_features(compute_features(input, radius_, exec));
}

void RegressorConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("regressor config: lr must be positive");
  if (epochs < 0) throw std::invalid_argument("regressor config: epochs must be >= 0");
  if (batch < 1 || hidden < 1 || feature_radius < 0 || n_paste < 0)
    throw std::invalid_argument("regressor config: batch, hidden, feature_radius or n_paste out of range");
  if (!(hflip_probability >= 0.0 && hflip_probability <= 1.0))
    throw std::invalid_argument("regressor config: hflip probability must be in [0, 1]");
}

TrainBatch copy_paste_augment(const TrainBatch& batch, const std::vector<MaskSet>& masks, int n_paste,
                              std::uint64_t seed) {
  batch.validate();
  if (batch.size() < 2) throw std::invalid_argument("copy_paste_augment: batch needs at least two images");
  if (masks.size() != batch.size()) throw std::invalid_argument("copy_paste_augment: one mask set per image");
  TrainBatch out = batch;
  std::mt19937_64 rng(seed);
  for (int k = 0; k < n_paste; ++k) {
    const auto src = std::uniform_int_distribution<std::size_t>(0, batch.size() - 1)(rng);
    auto dst = std::uniform_int_distribution<std::size_t>(0, batch.size() - 2)(rng);
    if (dst >= src) ++dst;
    const MaskSet& ms = masks[src];
    if (ms.count() == 0) continue;
    const int m = std::uniform_int_distribution<int>(0, ms.count() - 1)(rng);
    if (ms.height() != batch.inputs[src].height || ms.width() != batch.inputs[src].width ||
        batch.inputs[dst].height != batch.inputs[src].height || batch.inputs[dst].width != batch.inputs[src].width)
      throw std::invalid_argument("copy_paste_augment: masks or images differ in size");
    const auto plane = ms.masks.channel(m);
    // Paste from the pre-augmentation source so pastes do not chain.
    const ImageF& src_label = batch.labels[src];
    bool labeled = false;
    for (std::size_t p = 0; p < plane.size() && !labeled; ++p) labeled = plane[p] && src_label.data[p] != kUnknownCot;
    if (!labeled) continue;
    for (std::size_t p = 0; p < plane.size(); ++p) {
      if (!plane[p]) continue;
      out.labels[dst].data[p] = src_label.data[p];
      for (int c = 0; c < 4; ++c)
        out.inputs[dst].data[std::size_t(c) * plane.size() + p] = batch.inputs[src].data[std::size_t(c) * plane.size() + p];
    }
  }
  return out;
}

TrainBatch hflip_augment(const TrainBatch& batch, double probability, std::uint64_t seed) {
  TrainBatch out = batch;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution flip(std::clamp(probability, 0.0, 1.0));
  for (std::size_t b = 0; b < out.size(); ++b) {
    if (!flip(rng)) continue;
    auto mirror = [](auto& g) {
      for (int c = 0; c < g.channels; ++c)
        for (int y = 0; y < g.height; ++y) {
          auto* row = g.data.data() + g.index(c, y, 0);
          std::reverse(row, row + g.width);
        }
    };
    mirror(out.inputs[b]);
    mirror(out.labels[b]);
  }
  return out;
}

RegressTrainResult train_regressor(const std::vector<RegressSample>& dataset, LabelMode mode,
                                   const RegressorConfig& cfg, Exec exec) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train_regressor: empty dataset");
  std::size_t labeled = 0;
  for (const auto& s : dataset)
    labeled += static_cast<std::size_t>(
        std::count_if(s.label.data.begin(), s.label.data.end(), [](float v) { return v != kUnknownCot; }));
  if (labeled == 0)
    throw std::invalid_argument("train_regressor: no labeled pixels for mode " + to_string(mode));

  RegressTrainResult res;
  res.model = PatchMlpRegressor(cfg.hidden, cfg.feature_radius, cfg.seed);
  {
    std::vector<Field> feats;
    feats.reserve(dataset.size());
    for (const auto& s : dataset) feats.push_back(compute_features(s.input, cfg.feature_radius, exec));
    res.model.fit_normalization(feats);
  }
  AdamW opt;
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;
  std::mt19937_64 rng(cfg.seed ^ 0xc0ffee11ULL);
  ParamSet& params = res.model.params();
  const std::size_t np = params.values.size();

  for (int e = 0; e < cfg.epochs; ++e) {
    if (cfg.cosine_decay) opt.lr = 0.5 * cfg.lr * (1.0 + std::cos(std::numbers::pi * e / cfg.epochs));
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch)) {
      const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch));
      TrainBatch tb;
      std::vector<MaskSet> masks;
      for (std::size_t j = start; j < end; ++j) {
        tb.inputs.push_back(dataset[order[j]].input);
        tb.labels.push_back(dataset[order[j]].label);
        masks.push_back(dataset[order[j]].masks);
      }
      const std::uint64_t aug_seed = rng();
      if (tb.size() >= 2 && cfg.n_paste > 0) tb = copy_paste_augment(tb, masks, cfg.n_paste, aug_seed);
      tb = hflip_augment(tb, cfg.hflip_probability, aug_seed ^ 0x9e3779b97f4a7c15ULL);

      std::size_t total = 0, lab = 0;
      for (const auto& z : tb.labels) {
        total += z.data.size();
        lab += static_cast<std::size_t>(
            std::count_if(z.data.begin(), z.data.end(), [](float v) { return v != kUnknownCot; }));
      }
      const double denom = double(cfg.normalization == MaeNormalization::TotalPixels ? total : std::max<std::size_t>(lab, 1));
      const auto nb = static_cast<std::ptrdiff_t>(tb.size());
      std::vector<std::vector<double>> grads(tb.size(), std::vector<double>(np, 0.0));
      std::vector<double> losses(tb.size(), 0.0);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
      for (std::ptrdiff_t b = 0; b < nb; ++b) {
        const Field F = compute_features(tb.inputs[std::size_t(b)], cfg.feature_radius, Exec::Serial);
        losses[std::size_t(b)] = res.model.loss_on_features(F, tb.labels[std::size_t(b)], denom, &grads[std::size_t(b)]);
      }
      std::vector<double> g(np, 0.0);
      double loss = 0.0;
      for (std::size_t b = 0; b < tb.size(); ++b) {
        loss += losses[b];
        for (std::size_t p = 0; p < np; ++p) g[p] += grads[b][p];
      }
      opt.step(params, g);
      epoch_loss += loss;
      ++batches;
    }
    res.epoch_loss.push_back(batches ? epoch_loss / batches : 0.0);
  }
  return res;
}

ImageF predict_cot_image(const CotRegressor& model, const Field& input, Exec exec) {
  return model.predict(input, exec);
}

}  // namespace cotmap
