#include "cotmap/nn.hpp"

#include "cotmap/tensor_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cotmap {

std::size_t ParamSet::add(const std::string& name, std::vector<int> shape, bool decay, bool trainable) {
  ParamBlock b;
  b.name = name;
  b.size = 1;
  for (int d : shape) b.size *= static_cast<std::size_t>(d);
  b.shape = std::move(shape);
  b.offset = values.size();
  b.decay = decay;
  b.trainable = trainable;
  values.resize(values.size() + b.size, 0.0);
  blocks.push_back(std::move(b));
  return blocks.size() - 1;
}

const ParamBlock& ParamSet::block(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw std::out_of_range("no parameter block named " + name);
}

bool ParamSet::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void init_he_uniform(ParamSet& params, std::size_t block, int fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / std::max(1, fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  double* p = params.data(block);
  for (std::size_t i = 0; i < params.blocks[block].size; ++i) p[i] = dist(rng);
}

void AdamW::step(ParamSet& params, const std::vector<double>& grad) {
  if (grad.size() != params.values.size()) throw std::invalid_argument("AdamW: gradient size mismatch");
  if (m_.size() != grad.size()) {
    m_.assign(grad.size(), 0.0);
    v_.assign(grad.size(), 0.0);
    t_ = 0;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, double(t_));
  const double c2 = 1.0 - std::pow(beta2, double(t_));
  for (const auto& b : params.blocks) {
    if (!b.trainable) continue;
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
      m_[i] = beta1 * m_[i] + (1.0 - beta1) * grad[i];
      v_[i] = beta2 * v_[i] + (1.0 - beta2) * grad[i] * grad[i];
      double& w = params.values[i];
      if (b.decay) w -= lr * weight_decay * w;
      w -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
    }
  }
}

void save_params(const std::filesystem::path& tensor_path, const std::filesystem::path& manifest_path,
                 const ParamSet& params, const std::string& extra_json) {
  Tensor t;
  t.dtype = DType::F32;
  t.dims = {static_cast<std::uint32_t>(params.values.size())};
  t.f32.assign(params.values.begin(), params.values.end());
  write_tensor(tensor_path, t);

  nlohmann::ordered_json m;
  m["format"] = "cotmap-params";
  m["count"] = params.values.size();
  auto& blocks = m["blocks"];
  blocks = nlohmann::ordered_json::array();
  for (const auto& b : params.blocks)
    blocks.push_back({{"name", b.name}, {"shape", b.shape}, {"offset", b.offset}, {"decay", b.decay}});
  m["extra"] = extra_json.empty() ? nlohmann::ordered_json::object() : nlohmann::ordered_json::parse(extra_json);
  std::ofstream f(manifest_path);
  if (!f) throw std::runtime_error("cannot write " + manifest_path.string());
  f << m.dump(2) << '\n';
}

void load_params(const std::filesystem::path& tensor_path, const std::filesystem::path& manifest_path,
                 ParamSet& params) {
  std::ifstream f(manifest_path);
  if (!f) throw std::runtime_error("cannot read " + manifest_path.string());
  const auto m = nlohmann::json::parse(f);
  const auto& blocks = m.at("blocks");
  if (blocks.size() != params.blocks.size()) throw std::runtime_error("parameter manifest does not match model layout");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].at("name").get<std::string>() != params.blocks[i].name ||
        blocks[i].at("shape").get<std::vector<int>>() != params.blocks[i].shape)
      throw std::runtime_error("parameter block mismatch at " + params.blocks[i].name);
  }
  const Tensor t = read_tensor(tensor_path);
  if (t.dtype != DType::F32 || t.f32.size() != params.values.size())
    throw std::runtime_error("parameter tensor size does not match model layout");
  std::copy(t.f32.begin(), t.f32.end(), params.values.begin());
}

void conv2x2_forward(const Field& in, const double* w, const double* b, int cout, Field& out, Exec exec) {
  if (in.height % 2 || in.width % 2) throw std::invalid_argument("conv2x2: odd input size");
  const int cin = in.channels, oh = in.height / 2, ow = in.width / 2;
  if (!out.same_shape(cout, oh, ow)) out = Field(cout, oh, ow);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (int o = 0; o < cout; ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = b[o];
        for (int i = 0; i < cin; ++i) {
          const double* k = w + (std::size_t(o) * cin + i) * 4;
          s += k[0] * in.at(i, 2 * y, 2 * x) + k[1] * in.at(i, 2 * y, 2 * x + 1) + k[2] * in.at(i, 2 * y + 1, 2 * x) +
               k[3] * in.at(i, 2 * y + 1, 2 * x + 1);
        }
        out.at(o, y, x) = s;
      }
}

void conv2x2_backward(const Field& in, const double* w, const Field& gout, double* gw, double* gb, Field* gin,
                      Exec exec) {
  const int cin = in.channels, cout = gout.channels, oh = gout.height, ow = gout.width;
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (int o = 0; o < cout; ++o) {
    double sb = 0.0;
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) sb += gout.at(o, y, x);
    gb[o] += sb;
    for (int i = 0; i < cin; ++i) {
      double* k = gw + (std::size_t(o) * cin + i) * 4;
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          const double g = gout.at(o, y, x);
          k[0] += g * in.at(i, 2 * y, 2 * x);
          k[1] += g * in.at(i, 2 * y, 2 * x + 1);
          k[2] += g * in.at(i, 2 * y + 1, 2 * x);
          k[3] += g * in.at(i, 2 * y + 1, 2 * x + 1);
        }
    }
  }
  if (!gin) return;
  if (!gin->same_shape(cin, in.height, in.width)) *gin = Field(cin, in.height, in.width);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (int i = 0; i < cin; ++i)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double g0 = 0, g1 = 0, g2 = 0, g3 = 0;
        for (int o = 0; o < cout; ++o) {
          const double g = gout.at(o, y, x);
          const double* k = w + (std::size_t(o) * cin + i) * 4;
          g0 += g * k[0];
          g1 += g * k[1];
          g2 += g * k[2];
          g3 += g * k[3];
        }
        gin->at(i, 2 * y, 2 * x) = g0;
        gin->at(i, 2 * y, 2 * x + 1) = g1;
        gin->at(i, 2 * y + 1, 2 * x) = g2;
        gin->at(i, 2 * y + 1, 2 * x + 1) = g3;
      }
}

void tconv2x2_forward(const Field& in, const double* w, const double* b, int cout, Field& out, Exec exec) {
  const int cin = in.channels, ih = in.height, iw = in.width;
  if (!out.same_shape(cout, 2 * ih, 2 * iw)) out = Field(cout, 2 * ih, 2 * iw);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (int o = 0; o < cout; ++o)
    for (int y = 0; y < ih; ++y)
      for (int x = 0; x < iw; ++x) {
        double s0 = b[o], s1 = b[o], s2 = b[o], s3 = b[o];
        for (int i = 0; i < cin; ++i) {
          const double v = in.at(i, y, x);
          const double* k = w + (std::size_t(i) * cout + o) * 4;
          s0 += k[0] * v;
          s1 += k[1] * v;
          s2 += k[2] * v;
          s3 += k[3] * v;
        }
        out.at(o, 2 * y, 2 * x) = s0;
        out.at(o, 2 * y, 2 * x + 1) = s1;
        out.at(o, 2 * y + 1, 2 * x) = s2;
        out.at(o, 2 * y + 1, 2 * x + 1) = s3;
      }
}

void tconv2x2_backward(const Field& in, const double* w, const Field& gout, double* gw, double* gb, Field* gin,
                       Exec exec) {
  const int cin = in.channels, cout = gout.channels, ih = in.height, iw = in.width;
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (int o = 0; o < cout; ++o) {
    double sb = 0.0;
    for (int y = 0; y < gout.height; ++y)
      for (int x = 0; x < gout.width; ++x) sb += gout.at(o, y, x);
    gb[o] += sb;
  }
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (int i = 0; i < cin; ++i)
    for (int o = 0; o < cout; ++o) {
      double* k = gw + (std::size_t(i) * cout + o) * 4;
      for (int y = 0; y < ih; ++y)
        for (int x = 0; x < iw; ++x) {
          const double v = in.at(i, y, x);
          k[0] += v * gout.at(o, 2 * y, 2 * x);
          k[1] += v * gout.at(o, 2 * y, 2 * x + 1);
          k[2] += v * gout.at(o, 2 * y + 1, 2 * x);
          k[3] += v * gout.at(o, 2 * y + 1, 2 * x + 1);
        }
    }
  if (!gin) return;
  if (!gin->same_shape(cin, ih, iw)) *gin = Field(cin, ih, iw);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (int i = 0; i < cin; ++i)
    for (int y = 0; y < ih; ++y)
      for (int x = 0; x < iw; ++x) {
        double s = 0.0;
        for (int o = 0; o < cout; ++o) {
          const double* k = w + (std::size_t(i) * cout + o) * 4;
          s += k[0] * gout.at(o, 2 * y, 2 * x) + k[1] * gout.at(o, 2 * y, 2 * x + 1) +
               k[2] * gout.at(o, 2 * y + 1, 2 * x) + k[3] * gout.at(o, 2 * y + 1, 2 * x + 1);
        }
        gin->at(i, y, x) = s;
      }
}

void relu_inplace(Field& f) {
  for (auto& v : f.data) v = v > 0.0 ? v : 0.0;
}

void relu_backward(const Field& activated, Field& grad) {
  for (std::size_t i = 0; i < grad.data.size(); ++i)
    if (!(activated.data[i] > 0.0)) grad.data[i] = 0.0;
}

}  // namespace cotmap
