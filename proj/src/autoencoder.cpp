#include "dcc/autoencoder.hpp"

#include <cmath>
#include <string>

#include "dcc/error.hpp"
#include "dcc/optim.hpp"

namespace dcc {

namespace {

// Trains `net` to reproduce `target` from a corrupted copy of `target`.
void train_denoising(MlpParams& net, const Matrix& target, double corruption, std::size_t epochs,
                     std::size_t batch_size, double lr, SeededRng& rng, std::vector<double>* trace,
                     const std::string& stage, const ProgressFn& progress) {
  auto params = parameter_spans(net);
  AdamState adam = AdamState::for_params(params, lr);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const auto schedule = make_schedule(target.rows(), batch_size, rng);
    double total = 0.0;
    for (const auto& batch : schedule.batches) {
      const Matrix clean = gather_rows(target, batch);
      Matrix noisy = clean;
      if (corruption > 0.0) {
        for (double& v : noisy.values()) {
          if (rng.uniform() < corruption) v = 0.0;
        }
      }
      const auto stack = mlp_forward(net, noisy);
      auto term = mean_squared_error(stack.output, clean);
      if (!std::isfinite(term.loss)) {
        throw NumericError(stage + ": non-finite reconstruction loss at epoch " + std::to_string(epoch + 1));
      }
      total += term.loss * static_cast<double>(batch.size());
      const auto back = mlp_backward(net, stack, term.grad);
      adam_step(adam, params, gradient_spans(back.params));
    }
    const double mean = total / static_cast<double>(target.rows());
    if (trace) trace->push_back(mean);
    if (progress) progress(stage + " epoch " + std::to_string(epoch + 1) + " loss " + std::to_string(mean));
  }
}

}  // namespace

void SdaeConfig::validate() const {
  if (dims.size() < 2) throw ArgumentError("SDAE needs at least two layer widths");
  for (auto w : dims) {
    if (w == 0) throw ArgumentError("SDAE layer widths must be positive");
  }
  if (!(corruption_rate >= 0.0 && corruption_rate < 1.0)) {
    throw ArgumentError("corruption rate must lie in [0, 1)");
  }
  if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be positive");
  if (batch_size == 0) throw ArgumentError("batch size must be at least 1");
}

std::vector<std::size_t> default_dims(std::size_t d) { return {d, 500, 500, 2000, 10}; }

AutoencoderModel AutoencoderModel::random(const std::vector<std::size_t>& dims, SeededRng& rng) {
  AutoencoderModel model;
  model.encoder = MlpParams::glorot(dims, rng);
  const std::vector<std::size_t> reversed(dims.rbegin(), dims.rend());
  model.decoder = MlpParams::glorot(reversed, rng);
  return model;
}

AutoencoderModel pretrain_sdae(const Dataset& dataset, const SdaeConfig& config, SeededRng& rng,
                               PretrainLog* log, const ProgressFn& progress) {
  config.validate();
  if (dataset.dim() != config.dims.front()) {
    throw DimensionError("dataset has " + std::to_string(dataset.dim()) + " features but dims start at " +
                         std::to_string(config.dims.front()));
  }
  const std::size_t depth = config.dims.size() - 1;
  AutoencoderModel model;
  std::vector<DenseLayer> decoder_layers(depth);
  Matrix hidden = dataset.features;
  if (log) log->layerwise.assign(depth, {});

  for (std::size_t i = 0; i < depth; ++i) {
    const std::vector<std::size_t> widths{config.dims[i], config.dims[i + 1], config.dims[i]};
    MlpParams pair = MlpParams::glorot(widths, rng);
    // The latent layer stays linear; only the outermost decoder is linear.
    pair.layers[0].activation = (i + 1 == depth) ? Activation::identity : Activation::relu;
    pair.layers[1].activation = (i == 0) ? Activation::identity : Activation::relu;
    train_denoising(pair, hidden, config.corruption_rate, config.layerwise_epochs, config.batch_size,
                    config.learning_rate, rng, log ? &log->layerwise[i] : nullptr,
                    "layer " + std::to_string(i + 1), progress);
    MlpParams enc_only;
    enc_only.layers.push_back(pair.layers[0]);
    hidden = mlp_predict(enc_only, hidden);
    model.encoder.layers.push_back(std::move(pair.layers[0]));
    decoder_layers[depth - 1 - i] = std::move(pair.layers[1]);
  }
  model.decoder.layers = std::move(decoder_layers);

  // End-to-end fine-tuning on clean inputs.
  MlpParams full;
  full.layers = model.encoder.layers;
  full.layers.insert(full.layers.end(), model.decoder.layers.begin(), model.decoder.layers.end());
  train_denoising(full, dataset.features, 0.0, config.finetune_epochs, config.batch_size,
                  config.learning_rate, rng, log ? &log->finetune : nullptr, "finetune", progress);
  for (std::size_t i = 0; i < depth; ++i) {
    model.encoder.layers[i] = std::move(full.layers[i]);
    model.decoder.layers[i] = std::move(full.layers[depth + i]);
  }
  return model;
}

Matrix encode(const AutoencoderModel& model, const Matrix& x) {
  if (x.cols() != model.input_width()) {
    throw DimensionError("encode: input has " + std::to_string(x.cols()) + " columns, model expects " +
                         std::to_string(model.input_width()));
  }
  return mlp_predict(model.encoder, x);
}

SquaredErrorTerm mean_squared_error(const Matrix& recon, const Matrix& target) {
  if (recon.rows() != target.rows() || recon.cols() != target.cols()) {
    throw DimensionError("reconstruction shape does not match target");
  }
  SquaredErrorTerm term;
  term.grad = Matrix(recon.rows(), recon.cols());
  if (recon.rows() == 0) return term;
  const double inv_n = 1.0 / static_cast<double>(recon.rows());
  const auto r = recon.values();
  const auto t = target.values();
  auto g = term.grad.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double diff = r[i] - t[i];
    sum += diff * diff;
    g[i] = 2.0 * diff * inv_n;
  }
  term.loss = sum * inv_n;
  return term;
}

ReconstructionResult reconstruction_loss(const AutoencoderModel& model, const Matrix& x) {
  if (x.cols() != model.input_width()) {
    throw DimensionError("reconstruction_loss: input has " + std::to_string(x.cols()) +
                         " columns, model expects " + std::to_string(model.input_width()));
  }
  const auto enc = mlp_forward(model.encoder, x);
  const auto dec = mlp_forward(model.decoder, enc.output);
  auto term = mean_squared_error(dec.output, x);
  auto dec_back = mlp_backward(model.decoder, dec, term.grad);
  auto enc_back = mlp_backward(model.encoder, enc, dec_back.input);
  return {term.loss, std::move(enc_back.params), std::move(dec_back.params)};
}

double reconstruction_value(const AutoencoderModel& model, const Matrix& x) {
  const Matrix recon = mlp_predict(model.decoder, encode(model, x));
  return mean_squared_error(recon, x).loss;
}

}  // namespace dcc
