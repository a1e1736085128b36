// SPDX-License-Identifier: Apache-2.0
//
// Fully connected encoder/decoder pair. Every layer except the last of each
// network is followed by Softplus; the last layers are linear. Samples are the
// rows of a batch matrix.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gplasdi/fom.hpp"
#include "gplasdi/linalg.hpp"

namespace gplasdi {

double softplus(double x) noexcept;
double sigmoid(double x) noexcept;

/// Recorded intermediates of one forward pass.
struct ForwardTape {
  std::vector<DenseMatrix> inputs;       ///< input to each layer
  std::vector<DenseMatrix> activations;  ///< pre-activation of each layer
};

/// A chain of dense layers. Weights are stored fan_in × fan_out.
class FeedForward {
 public:
  FeedForward() = default;
  explicit FeedForward(std::vector<std::size_t> widths);

  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  std::size_t n_layers() const noexcept { return weights.size(); }
  std::size_t input_width() const noexcept { return widths_.front(); }
  std::size_t output_width() const noexcept { return widths_.back(); }
  std::size_t parameter_count() const noexcept;

  DenseMatrix forward(const DenseMatrix& x) const;
  DenseMatrix forward(const DenseMatrix& x, ForwardTape& tape) const;

  /// Reverse pass. Accumulates parameter gradients into `grads` (weights then
  /// biases, layer by layer, see tensor order) and returns ∂L/∂input when
  /// `input_gradient` is set.
  DenseMatrix backward(const ForwardTape& tape, DenseMatrix d_out,
                       std::span<DenseMatrix> grads, bool input_gradient) const;

  std::vector<DenseMatrix> weights;
  std::vector<DenseMatrix> biases;  ///< 1 × fan_out

 private:
  std::vector<std::size_t> widths_;
};

/// Moment accumulators for Adam over an ordered list of tensors.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<DenseMatrix> first_moment;
  std::vector<DenseMatrix> second_moment;

  /// Zeroed moments shaped like `params`.
  static AdamState for_tensors(std::span<const DenseMatrix* const> params);
};

/// Bias-corrected Adam update of every tensor in `params`.
void adam_update(std::span<DenseMatrix* const> params, std::span<const DenseMatrix> grads,
                 AdamState& state, double lr);

struct MLPParameters {
  /// Encoder widths Nu → … → Nz; the decoder uses the reverse.
  std::vector<std::size_t> layer_sizes;
  FeedForward encoder;
  FeedForward decoder;
  AdamState adam;

  MLPParameters() = default;
  /// Zero weights and biases.
  explicit MLPParameters(std::vector<std::size_t> layer_sizes);
  /// Uniform ±√(6/(fan_in+fan_out)) weights, zero biases.
  static MLPParameters initialized(std::vector<std::size_t> layer_sizes, std::uint64_t seed);

  std::size_t full_width() const noexcept { return layer_sizes.front(); }
  std::size_t latent_width() const noexcept { return layer_sizes.back(); }

  /// Encoder (w0, b0, w1, b1, …) followed by decoder tensors.
  std::vector<DenseMatrix*> tensors();
  std::vector<const DenseMatrix*> tensors() const;
  /// Zero tensors shaped like tensors().
  std::vector<DenseMatrix> zero_gradients() const;
};

DenseMatrix encode(const MLPParameters& params, const DenseMatrix& batch);
std::vector<double> encode(const MLPParameters& params, std::span<const double> u);
DenseMatrix decode(const MLPParameters& params, const DenseMatrix& batch);
std::vector<double> decode(const MLPParameters& params, std::span<const double> z);

/// Mean squared error of decode(encode(U)) over every (sample, time, node) entry.
double reconstruction_loss(const MLPParameters& params, std::span<const DenseMatrix> samples);

/// Global affine map of temperatures to [0, 1].
struct NormalizationSpec {
  double min = 0.0;
  double max = 1.0;

  double apply(double v) const noexcept { return (v - min) / (max - min); }
  double invert(double v) const noexcept { return min + v * (max - min); }
  DenseMatrix apply(const DenseMatrix& m) const;
  DenseMatrix invert(const DenseMatrix& m) const;

  friend bool operator==(const NormalizationSpec&, const NormalizationSpec&) = default;
};

/// Fits the map on `samples`; throws DegenerateRange for constant data.
NormalizationSpec fit_normalization(std::span<const DenseMatrix> samples);

struct NormalizedTensor {
  std::vector<DenseMatrix> values;
  NormalizationSpec spec;
};
NormalizedTensor normalize(const SnapshotTensor& tensor);

/// Manifest `<stem>.json` + f64-le blob `<stem>.bin` holding parameters and
/// Adam moments.
struct ModelCheckpoint {
  MLPParameters params;
  NormalizationSpec normalization;
  std::uint64_t seed = 0;
  long epoch = 0;
};
void save_model(const std::filesystem::path& dir, const ModelCheckpoint& checkpoint,
                const std::string& stem = "model");
ModelCheckpoint load_model(const std::filesystem::path& dir, const std::string& stem = "model");

}  // namespace gplasdi
