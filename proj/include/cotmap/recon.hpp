#pragma once

#include "cotmap/masks.hpp"
#include "cotmap/nn.hpp"
#include "cotmap/simworld.hpp"

#include <cstdint>
#include <vector>

namespace cotmap {

/// Two nested stride-2 autoencoders over a 4-channel RGBD input.
///
///   I -> conv -> a1 (H/2) -> conv -> L1 (H/4) -> conv -> L2 (H/8)
///   L2 -> tconv -> d2 (H/4) -> tconv -> d1 (H/2) -> tconv -> O
///
/// The inner pair (L1 -> L2 -> d2) is an autoencoder nested inside the outer one.
/// Hidden activations are ReLU; the output layer is linear.
class ReconstructionModel {
 public:
  struct Activations {
    Field a1, l1, l2, d2, d1, out;
  };

  ReconstructionModel() = default;
  ReconstructionModel(int c1, int c2, std::uint64_t seed);

  int c1() const { return c1_; }
  int c2() const { return c2_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// Input is 4 x H x W with H and W divisible by 8.
  Activations forward(const Field& input, Exec exec = Exec::Parallel) const;
  /// Accumulates parameter gradients into `grad` given gradients w.r.t. O, L1 and L2.
  void backward(const Field& input, const Activations& act, const Field& g_out, const Field& g_l1, const Field& g_l2,
                std::vector<double>& grad, Exec exec = Exec::Parallel) const;

 private:
  int c1_ = 0, c2_ = 0;
  ParamSet params_;
};

/// RGB scaled to [0, 1] and depth divided by `depth_scale`.
Field recon_input(const Keyframe& keyframe, double depth_scale);

struct ReconLossOptions {
  bool masked_main = true;       ///< false: mean over every pixel (debug)
  bool per_channel_mean = false; ///< divide latent channel sums by the channel count
};

struct ReconLosses {
  double main = 0.0;
  double aux = 0.0;
  double total = 0.0;
  std::vector<double> se;  ///< per mask; NaN when the mask vanishes at a latent resolution
};

/// Per-mask SE = (mu_L1 - mu_L2)^2 where mu is the mean channel-summed latent over
/// the mask after majority pooling to that latent's resolution.
std::vector<double> mask_squared_errors(const ReconstructionModel::Activations& act, const MaskSet& masks,
                                        const ReconLossOptions& opts = {});

/// Main loss over traversable pixels (mean over pixels and the 4 channels), auxiliary
/// loss = sum of SE over `masks`, total = main + aux. Fills `grad` (sized like the
/// parameters, overwritten) when non-null. Throws if `traversable` is empty.
ReconLosses reconstruction_losses(const ReconstructionModel& model, const Field& input,
                                  const std::vector<std::uint8_t>& traversable, const MaskSet& masks,
                                  const ReconLossOptions& opts = {}, std::vector<double>* grad = nullptr,
                                  Exec exec = Exec::Parallel);

struct ReconSample {
  Field input;
  std::vector<std::uint8_t> traversable;
  MaskSet masks;  ///< masks entering the auxiliary loss
};

enum class OptimizerKind { SGD, AdamW };

struct ReconTrainConfig {
  int c1 = 8;
  int c2 = 16;
  int epochs = 20;
  int batch = 4;
  double lr = 1e-4;
  double weight_decay = 0.0;
  OptimizerKind optimizer = OptimizerKind::SGD;
  ReconLossOptions loss;
};

struct ReconTrainResult {
  ReconstructionModel model;
  std::vector<double> epoch_main;  ///< mean training L_main, index 0 = before training
  std::vector<double> epoch_aux;
};

ReconTrainResult train_reconstruction_model(const std::vector<ReconSample>& samples, const ReconTrainConfig& cfg,
                                            std::uint64_t seed, Exec exec = Exec::Parallel);

}  // namespace cotmap
