#pragma once

// Minimal training primitives shared by the reconstruction model and the regressor.
// Everything runs in double precision so finite-difference checks stay tight.

#include "cotmap/image.hpp"
#include "cotmap/parallel.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace cotmap {

using Field = Grid<double>;

struct ParamBlock {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool decay = true;      ///< weight decay applies (off for biases)
  bool trainable = true;  ///< false for frozen statistics such as feature normalization
};

/// Flat parameter vector with named views.
struct ParamSet {
  std::vector<double> values;
  std::vector<ParamBlock> blocks;

  std::size_t add(const std::string& name, std::vector<int> shape, bool decay, bool trainable = true);
  const ParamBlock& block(const std::string& name) const;
  double* data(std::size_t block_index) { return values.data() + blocks[block_index].offset; }
  const double* data(std::size_t block_index) const { return values.data() + blocks[block_index].offset; }
  bool all_finite() const;
};

/// Uniform(-b, b) with b = sqrt(6 / fan_in) for weights; biases are set to `bias`.
void init_he_uniform(ParamSet& params, std::size_t block, int fan_in, std::mt19937_64& rng);

struct AdamW {
  double lr = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void step(ParamSet& params, const std::vector<double>& grad);

 private:
  std::vector<double> m_, v_;
  long t_ = 0;
};

/// Saves parameters as a flat f32 tensor next to a JSON manifest (names, shapes, extra).
void save_params(const std::filesystem::path& tensor_path, const std::filesystem::path& manifest_path,
                 const ParamSet& params, const std::string& extra_json);
/// Loads values into a ParamSet whose layout is already built; checks names and shapes.
void load_params(const std::filesystem::path& tensor_path, const std::filesystem::path& manifest_path,
                 ParamSet& params);

// 2x2 kernels with stride 2; weights laid out [cout][cin][2][2] for conv and
// [cin][cout][2][2] for the transposed conv.

void conv2x2_forward(const Field& in, const double* w, const double* b, int cout, Field& out, Exec exec);
/// Accumulates into gw/gb; writes gin when non-null.
void conv2x2_backward(const Field& in, const double* w, const Field& gout, double* gw, double* gb, Field* gin,
                      Exec exec);

void tconv2x2_forward(const Field& in, const double* w, const double* b, int cout, Field& out, Exec exec);
void tconv2x2_backward(const Field& in, const double* w, const Field& gout, double* gw, double* gb, Field* gin,
                       Exec exec);

void relu_inplace(Field& f);
/// Zeroes gradient entries where the activation output is not positive.
void relu_backward(const Field& activated, Field& grad);

}  // namespace cotmap
