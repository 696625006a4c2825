#pragma once

#include "cotmap/cotlabel.hpp"
#include "cotmap/masks.hpp"
#include "cotmap/nn.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cotmap {

/// Label sets used for training, from path-only labels to confidence-augmented ones.
enum class LabelMode { SL, SL_SAM, UN_SAM, C_SAM };

std::string to_string(LabelMode m);
/// Accepts sl, sl-sam, un-sam, c-sam (case-insensitive); nullopt otherwise.
std::optional<LabelMode> parse_label_mode(const std::string& s);

/// Inputs are 4 x H x W (RGB in [0,1], scaled depth); labels 1 x H x W with 0 = unknown.
struct TrainBatch {
  std::vector<Field> inputs;
  std::vector<ImageF> labels;

  std::size_t size() const { return inputs.size(); }
  void validate() const;
};

enum class MaeNormalization { TotalPixels, LabeledPixels };

/// Sum of |Z - P| over pixels with Z != 0, divided by the batch's pixel count
/// (or by the labeled count when asked).
double masked_mae(const std::vector<ImageF>& Z, const std::vector<ImageF>& P,
                  MaeNormalization norm = MaeNormalization::TotalPixels);
double masked_mae(const ImageF& Z, const ImageF& P, MaeNormalization norm = MaeNormalization::TotalPixels);

/// Pixel-wise MSE over pixels where `truth` is nonzero.
double masked_mse(const ImageF& truth, const ImageF& pred);

/// Per-pixel features: patch mean and std of R, G, B and depth over the pixels of a
/// (2r+1)^2 window (clipped at the border) that share the centre's depth validity, then
/// depth and inverse-depth gradients along x and y (one-sided next to invalid depth).
inline constexpr int kFeatureCount = 12;
Field compute_features(const Field& input, int radius, Exec exec = Exec::Parallel);

/// Pixel-wise COT regressor over 4 x H x W inputs with a nonnegative output.
class CotRegressor {
 public:
  virtual ~CotRegressor() = default;
  virtual ImageF predict(const Field& input, Exec exec = Exec::Parallel) const = 0;
  virtual ParamSet& params() = 0;
  virtual const ParamSet& params() const = 0;
};

/// Standardized patch features -> dense(hidden) -> ReLU -> dense(1) -> ReLU.
class PatchMlpRegressor final : public CotRegressor {
 public:
  enum class Init { Random, Zero };

  PatchMlpRegressor() = default;
  PatchMlpRegressor(int hidden, int feature_radius, std::uint64_t seed, Init init = Init::Random);

  ImageF predict(const Field& input, Exec exec = Exec::Parallel) const override;
  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }
  int hidden() const { return hidden_; }
  int feature_radius() const { return radius_; }

  /// Sets the standardization statistics from raw feature fields.
  void fit_normalization(const std::vector<Field>& features);
  ImageF predict_features(const Field& features) const;
  /// Masked MAE contribution of one image (sum of |Z-P| / denom); accumulates the
  /// parameter gradient into `grad` when non-null.
  double loss_on_features(const Field& features, const ImageF& labels, double denom,
                          std::vector<double>* grad) const;

 private:
  int hidden_ = 0;
  int radius_ = 0;
  ParamSet params_;
};

struct RegressorConfig {
  double lr = 1e-4;
  double weight_decay = 0.01;
  int epochs = 10;
  int batch = 4;
  int hidden = 16;
  int feature_radius = 2;
  int n_paste = 1;
  double hflip_probability = 0.5;
  bool cosine_decay = false;  ///< anneal lr to zero over the epochs
  MaeNormalization normalization = MaeNormalization::TotalPixels;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Copies a randomly chosen mask's input and label pixels from one image onto another
/// at the same coordinates. Masks with no labeled pixels are skipped.
TrainBatch copy_paste_augment(const TrainBatch& batch, const std::vector<MaskSet>& masks, int n_paste,
                              std::uint64_t seed);

/// Mirrors each image and its labels about the vertical axis with the given probability.
TrainBatch hflip_augment(const TrainBatch& batch, double probability, std::uint64_t seed);

struct RegressSample {
  Field input;
  ImageF label;
  MaskSet masks;
};

struct RegressTrainResult {
  PatchMlpRegressor model;
  std::vector<double> epoch_loss;  ///< mean masked MAE per epoch over the augmented batches
};

RegressTrainResult train_regressor(const std::vector<RegressSample>& dataset, LabelMode mode,
                                   const RegressorConfig& cfg, Exec exec = Exec::Parallel);

ImageF predict_cot_image(const CotRegressor& model, const Field& input, Exec exec = Exec::Parallel);

}  // namespace cotmap
