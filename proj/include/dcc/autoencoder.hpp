#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dcc/data_io.hpp"
#include "dcc/matrix.hpp"
#include "dcc/mlp.hpp"
#include "dcc/rng.hpp"

namespace dcc {

struct SdaeConfig {
  std::vector<std::size_t> dims;  // d, hidden..., latent
  double corruption_rate = 0.2;
  std::size_t layerwise_epochs = 50;
  std::size_t finetune_epochs = 100;
  double learning_rate = 0.001;
  std::size_t batch_size = 256;

  void validate() const;
};

/// Default d-500-500-2000-10 widths for input width `d`.
std::vector<std::size_t> default_dims(std::size_t d);

struct AutoencoderModel {
  MlpParams encoder;  // f
  MlpParams decoder;  // g, widths mirror the encoder

  std::size_t input_width() const { return encoder.input_width(); }
  std::size_t latent_width() const { return encoder.output_width(); }

  /// Glorot-initialized encoder/decoder pair for `dims`.
  static AutoencoderModel random(const std::vector<std::size_t>& dims, SeededRng& rng);

  friend bool operator==(const AutoencoderModel&, const AutoencoderModel&) = default;
};

/// Per-stage mean reconstruction loss, one entry per epoch.
struct PretrainLog {
  std::vector<std::vector<double>> layerwise;
  std::vector<double> finetune;
};

using ProgressFn = std::function<void(const std::string&)>;

AutoencoderModel pretrain_sdae(const Dataset& dataset, const SdaeConfig& config, SeededRng& rng,
                               PretrainLog* log = nullptr, const ProgressFn& progress = {});

Matrix encode(const AutoencoderModel& model, const Matrix& x);

struct ReconstructionResult {
  double loss = 0.0;
  MlpGradients encoder;
  MlpGradients decoder;
};

/// Batch mean of ||g(f(x_i)) - x_i||^2 and its gradients.
ReconstructionResult reconstruction_loss(const AutoencoderModel& model, const Matrix& x);

/// Loss value only.
double reconstruction_value(const AutoencoderModel& model, const Matrix& x);

struct SquaredErrorTerm {
  double loss = 0.0;
  Matrix grad;  // d loss / d reconstruction
};

/// mean_i ||recon_i - target_i||^2 over rows.
SquaredErrorTerm mean_squared_error(const Matrix& recon, const Matrix& target);

}  // namespace dcc
