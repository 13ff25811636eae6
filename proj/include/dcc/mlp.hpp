#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dcc/matrix.hpp"
#include "dcc/rng.hpp"

namespace dcc {

enum class Activation : std::uint8_t { relu = 0, identity = 1 };

/// Fully connected layer: y = act(x W^T + b), W is out x in.
struct DenseLayer {
  Matrix weight;
  AlignedBuffer bias;
  Activation activation = Activation::relu;

  std::size_t in_width() const { return weight.cols(); }
  std::size_t out_width() const { return weight.rows(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t input_width() const;
  std::size_t output_width() const;
  /// Layer widths, input first.
  std::vector<std::size_t> widths() const;

  /// Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases, rectifier on
  /// every layer except the last.
  static MlpParams glorot(std::span<const std::size_t> widths, SeededRng& rng);

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Everything the backward pass needs, plus the output.
struct ForwardStack {
  std::vector<Matrix> inputs;  // inputs[l] feeds layer l
  std::vector<Matrix> pre;     // pre-activation of layer l
  Matrix output;
  std::vector<std::size_t> shape_signature;
};

struct LayerGradient {
  Matrix weight;
  AlignedBuffer bias;
};

struct MlpGradients {
  std::vector<LayerGradient> layers;

  static MlpGradients zeros_like(const MlpParams& params);
  void add(const MlpGradients& other);
  void scale(double factor);
};

struct BackwardResult {
  MlpGradients params;
  Matrix input;
};

ForwardStack mlp_forward(const MlpParams& params, const Matrix& x);

/// Output only; processes large inputs in row chunks and keeps no stack.
Matrix mlp_predict(const MlpParams& params, const Matrix& x);

BackwardResult mlp_backward(const MlpParams& params, const ForwardStack& stack,
                            const Matrix& grad_output);

/// Mutable views of every parameter buffer, layer order, weight then bias.
std::vector<std::span<double>> parameter_spans(MlpParams& params);
std::vector<std::span<const double>> gradient_spans(const MlpGradients& grads);
std::vector<std::span<double>> gradient_spans(MlpGradients& grads);

}  // namespace dcc
