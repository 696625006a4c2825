#include "cotmap/recon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cotmap {

namespace {

enum Block { W1, B1, W2, B2, W3, B3, W4, B4, W5, B5, W6, B6 };

// Mean channel-summed value of `f` over each mask (already at f's resolution).
std::vector<double> mask_means(const Field& f, const ImageU8& masks, std::vector<std::size_t>& counts, bool per_channel) {
  const int n = masks.channels;
  std::vector<double> mu(std::size_t(n), std::numeric_limits<double>::quiet_NaN());
  counts.assign(std::size_t(n), 0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    std::size_t cnt = 0;
    for (int y = 0; y < f.height; ++y)
      for (int x = 0; x < f.width; ++x) {
        if (!masks.at(i, y, x)) continue;
        ++cnt;
        for (int c = 0; c < f.channels; ++c) s += f.at(c, y, x);
      }
    counts[std::size_t(i)] = cnt;
    if (cnt) mu[std::size_t(i)] = s / double(cnt) / (per_channel ? f.channels : 1);
  }
  return mu;
}

}  // namespace

ReconstructionModel::ReconstructionModel(int c1, int c2, std::uint64_t seed) : c1_(c1), c2_(c2) {
  if (c1 <= 0 || c2 <= 0) throw std::invalid_argument("reconstruction model: channel counts must be positive");
  params_.add("enc1a.w", {c1, 4, 2, 2}, true);
  params_.add("enc1a.b", {c1}, false);
  params_.add("enc1b.w", {c1, c1, 2, 2}, true);
  params_.add("enc1b.b", {c1}, false);
  params_.add("enc2.w", {c2, c1, 2, 2}, true);
  params_.add("enc2.b", {c2}, false);
  params_.add("dec2.w", {c2, c1, 2, 2}, true);
  params_.add("dec2.b", {c1}, false);
  params_.add("dec1b.w", {c1, c1, 2, 2}, true);
  params_.add("dec1b.b", {c1}, false);
  params_.add("dec1a.w", {c1, 4, 2, 2}, true);
  params_.add("dec1a.b", {4}, false);
  std::mt19937_64 rng(seed);
  init_he_uniform(params_, W1, 4 * 4, rng);
  init_he_uniform(params_, W2, c1 * 4, rng);
  init_he_uniform(params_, W3, c1 * 4, rng);
  init_he_uniform(params_, W4, c2, rng);
  init_he_uniform(params_, W5, c1, rng);
  init_he_uniform(params_, W6, c1, rng);
}

ReconstructionModel::Activations ReconstructionModel::forward(const Field& input, Exec exec) const {
  if (input.channels != 4 || input.height % 8 || input.width % 8 || input.height == 0)
    throw std::invalid_argument("reconstruction model: input must be 4 x H x W with H, W divisible by 8");
  Activations a;
  const auto& p = params_;
  conv2x2_forward(input, p.data(W1), p.data(B1), c1_, a.a1, exec);
  relu_inplace(a.a1);
  conv2x2_forward(a.a1, p.data(W2), p.data(B2), c1_, a.l1, exec);
  relu_inplace(a.l1);
  conv2x2_forward(a.l1, p.data(W3), p.data(B3), c2_, a.l2, exec);
  relu_inplace(a.l2);
  tconv2x2_forward(a.l2, p.data(W4), p.data(B4), c1_, a.d2, exec);
  relu_inplace(a.d2);
  tconv2x2_forward(a.d2, p.data(W5), p.data(B5), c1_, a.d1, exec);
  relu_inplace(a.d1);
  tconv2x2_forward(a.d1, p.data(W6), p.data(B6), 4, a.out, exec);
  return a;
}

void ReconstructionModel::backward(const Field& input, const Activations& a, const Field& g_out, const Field& g_l1,
                                   const Field& g_l2, std::vector<double>& grad, Exec exec) const {
  if (grad.size() != params_.values.size()) grad.assign(params_.values.size(), 0.0);
  auto g = [&](int b) { return grad.data() + params_.blocks[std::size_t(b)].offset; };
  const auto& p = params_;
  Field gd1, gd2, gl2, gl1, ga1;
  tconv2x2_backward(a.d1, p.data(W6), g_out, g(W6), g(B6), &gd1, exec);
  relu_backward(a.d1, gd1);
  tconv2x2_backward(a.d2, p.data(W5), gd1, g(W5), g(B5), &gd2, exec);
  relu_backward(a.d2, gd2);
  tconv2x2_backward(a.l2, p.data(W4), gd2, g(W4), g(B4), &gl2, exec);
  for (std::size_t i = 0; i < gl2.data.size(); ++i) gl2.data[i] += g_l2.data[i];
  relu_backward(a.l2, gl2);
  conv2x2_backward(a.l1, p.data(W3), gl2, g(W3), g(B3), &gl1, exec);
  for (std::size_t i = 0; i < gl1.data.size(); ++i) gl1.data[i] += g_l1.data[i];
  relu_backward(a.l1, gl1);
  conv2x2_backward(a.a1, p.data(W2), gl1, g(W2), g(B2), &ga1, exec);
  relu_backward(a.a1, ga1);
  conv2x2_backward(input, p.data(W1), ga1, g(W1), g(B1), nullptr, exec);
}

Field recon_input(const Keyframe& keyframe, double depth_scale) {
  const int h = keyframe.rgb.height, w = keyframe.rgb.width;
  if (!keyframe.depth.same_shape(1, h, w)) throw std::invalid_argument("recon_input: depth/rgb size mismatch");
  Field f(4, h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) f.at(c, y, x) = keyframe.rgb.at(c, y, x) / 255.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) f.at(3, y, x) = keyframe.depth.at(y, x) / depth_scale;
  return f;
}

std::vector<double> mask_squared_errors(const ReconstructionModel::Activations& act, const MaskSet& masks,
                                        const ReconLossOptions& opts) {
  const int h = masks.height(), w = masks.width();
  if (masks.count() == 0) return {};
  if (act.l1.height * 4 != h || act.l1.width * 4 != w) throw std::invalid_argument("masks do not match model input");
  std::vector<std::size_t> n1, n2;
  const auto mu1 = mask_means(act.l1, downsample_masks(masks.masks, 4), n1, opts.per_channel_mean);
  const auto mu2 = mask_means(act.l2, downsample_masks(masks.masks, 8), n2, opts.per_channel_mean);
  std::vector<double> se(mu1.size());
  for (std::size_t i = 0; i < se.size(); ++i) se[i] = (mu1[i] - mu2[i]) * (mu1[i] - mu2[i]);
  return se;
}

ReconLosses reconstruction_losses(const ReconstructionModel& model, const Field& input,
                                  const std::vector<std::uint8_t>& traversable, const MaskSet& masks,
                                  const ReconLossOptions& opts, std::vector<double>* grad, Exec exec) {
  const int h = input.height, w = input.width;
  if (traversable.size() != input.plane()) throw std::invalid_argument("traversable mask size mismatch");
  const auto m_count = static_cast<std::size_t>(std::count_if(traversable.begin(), traversable.end(),
                                                              [](std::uint8_t v) { return v != 0; }));
  if (opts.masked_main && m_count == 0) throw std::invalid_argument("reconstruction loss: empty traversable mask");
  if (masks.count() > 0 && (masks.height() != h || masks.width() != w))
    throw std::invalid_argument("reconstruction loss: masks do not match input");

  const auto act = model.forward(input, exec);
  ReconLosses L;
  const double denom = 4.0 * double(opts.masked_main ? m_count : input.plane());
  Field g_out(4, h, w);
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (opts.masked_main && !traversable[std::size_t(y) * w + x]) continue;
        const double r = act.out.at(c, y, x) - input.at(c, y, x);
        L.main += r * r;
        g_out.at(c, y, x) = 2.0 * r / denom;
      }
  L.main /= denom;

  Field g_l1(act.l1.channels, act.l1.height, act.l1.width);
  Field g_l2(act.l2.channels, act.l2.height, act.l2.width);
  if (masks.count() > 0) {
    const ImageU8 m1 = downsample_masks(masks.masks, 4), m2 = downsample_masks(masks.masks, 8);
    std::vector<std::size_t> n1, n2;
    const auto mu1 = mask_means(act.l1, m1, n1, opts.per_channel_mean);
    const auto mu2 = mask_means(act.l2, m2, n2, opts.per_channel_mean);
    L.se.resize(mu1.size());
    for (std::size_t i = 0; i < mu1.size(); ++i) {
      const double d = mu1[i] - mu2[i];
      L.se[i] = d * d;
      if (std::isnan(d)) continue;
      L.aux += d * d;
      if (!grad) continue;
      const double s1 = 2.0 * d / double(n1[i]) / (opts.per_channel_mean ? act.l1.channels : 1);
      const double s2 = -2.0 * d / double(n2[i]) / (opts.per_channel_mean ? act.l2.channels : 1);
      for (int y = 0; y < m1.height; ++y)
        for (int x = 0; x < m1.width; ++x)
          if (m1.at(int(i), y, x))
            for (int c = 0; c < g_l1.channels; ++c) g_l1.at(c, y, x) += s1;
      for (int y = 0; y < m2.height; ++y)
        for (int x = 0; x < m2.width; ++x)
          if (m2.at(int(i), y, x))
            for (int c = 0; c < g_l2.channels; ++c) g_l2.at(c, y, x) += s2;
    }
  }
  L.total = L.main + L.aux;
  if (grad) {
    grad->assign(model.params().values.size(), 0.0);
    model.backward(input, act, g_out, g_l1, g_l2, *grad, exec);
  }
  return L;
}

ReconTrainResult train_reconstruction_model(const std::vector<ReconSample>& samples, const ReconTrainConfig& cfg,
                                            std::uint64_t seed, Exec exec) {
  if (cfg.epochs < 0 || cfg.batch < 1 || !(cfg.lr > 0.0))
    throw std::invalid_argument("reconstruction training: invalid epochs, batch or lr");
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (std::any_of(samples[i].traversable.begin(), samples[i].traversable.end(), [](std::uint8_t v) { return v; }))
      usable.push_back(i);
  if (usable.empty()) throw std::invalid_argument("reconstruction training: no traversable pixels in the dataset");

  ReconTrainResult res;
  res.model = ReconstructionModel(cfg.c1, cfg.c2, seed);
  std::mt19937_64 rng(seed ^ 0x5eedf00dULL);
  AdamW adam;
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.weight_decay;

  auto evaluate = [&] {
    double m = 0.0, a = 0.0;
    for (std::size_t i : usable) {
      const auto L = reconstruction_losses(res.model, samples[i].input, samples[i].traversable, samples[i].masks,
                                           cfg.loss, nullptr, exec);
      m += L.main;
      a += L.aux;
    }
    res.epoch_main.push_back(m / double(usable.size()));
    res.epoch_aux.push_back(a / double(usable.size()));
  };
  evaluate();

  ParamSet& params = res.model.params();
  std::vector<double> grad, sum(params.values.size());
  for (int e = 0; e < cfg.epochs; ++e) {
    std::vector<std::size_t> order = usable;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch)) {
      const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch));
      std::fill(sum.begin(), sum.end(), 0.0);
      for (std::size_t j = start; j < end; ++j) {
        const auto& s = samples[order[j]];
        reconstruction_losses(res.model, s.input, s.traversable, s.masks, cfg.loss, &grad, exec);
        for (std::size_t p = 0; p < sum.size(); ++p) sum[p] += grad[p];
      }
      const double inv = 1.0 / double(end - start);
      for (auto& v : sum) v *= inv;
      if (cfg.optimizer == OptimizerKind::AdamW) {
        adam.step(params, sum);
      } else {
        for (const auto& b : params.blocks)
          for (std::size_t p = b.offset; p < b.offset + b.size; ++p) {
            if (b.decay) params.values[p] -= cfg.lr * cfg.weight_decay * params.values[p];
            params.values[p] -= cfg.lr * sum[p];
          }
      }
    }
    evaluate();
  }
  return res;
}

}  // namespace cotmap
