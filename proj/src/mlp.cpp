#include "dcc/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dcc/error.hpp"
#include "eigen_view.hpp"

namespace dcc {

using detail::view;

namespace {

constexpr std::size_t kPredictChunk = 1024;

std::vector<std::size_t> signature_of(const MlpParams& params, std::size_t rows) {
  std::vector<std::size_t> sig = params.widths();
  sig.push_back(rows);
  return sig;
}

void apply_layer(const DenseLayer& layer, const Matrix& in, Matrix& pre, Matrix* post) {
  pre = Matrix(in.rows(), layer.out_width());
  auto p = view(pre);
  p.noalias() = view(in) * view(layer.weight).transpose();
  p.rowwise() += detail::ConstVectorView(layer.bias.data(), static_cast<Eigen::Index>(layer.bias.size()))
                     .transpose();
  if (post == nullptr) return;
  *post = pre;
  if (layer.activation == Activation::relu) {
    for (double& v : post->values()) v = v > 0.0 ? v : 0.0;
  }
}

}  // namespace

std::size_t MlpParams::input_width() const {
  return layers.empty() ? 0 : layers.front().in_width();
}

std::size_t MlpParams::output_width() const {
  return layers.empty() ? 0 : layers.back().out_width();
}

std::vector<std::size_t> MlpParams::widths() const {
  std::vector<std::size_t> w;
  if (layers.empty()) return w;
  w.push_back(layers.front().in_width());
  for (const auto& l : layers) w.push_back(l.out_width());
  return w;
}

MlpParams MlpParams::glorot(std::span<const std::size_t> widths, SeededRng& rng) {
  if (widths.size() < 2) throw ArgumentError("an MLP needs at least two widths");
  MlpParams params;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l];
    const std::size_t out = widths[l + 1];
    if (in == 0 || out == 0) throw ArgumentError("layer widths must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer;
    layer.weight = Matrix(out, in);
    for (double& w : layer.weight.values()) w = rng.uniform(-limit, limit);
    layer.bias.assign(out, 0.0);
    layer.activation = (l + 2 == widths.size()) ? Activation::identity : Activation::relu;
    params.layers.push_back(std::move(layer));
  }
  return params;
}

MlpGradients MlpGradients::zeros_like(const MlpParams& params) {
  MlpGradients g;
  g.layers.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    g.layers.push_back({Matrix(l.out_width(), l.in_width()), AlignedBuffer(l.out_width(), 0.0)});
  }
  return g;
}

void MlpGradients::add(const MlpGradients& other) {
  if (other.layers.size() != layers.size()) throw DimensionError("gradient layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& a = layers[l];
    const auto& b = other.layers[l];
    if (a.weight.size() != b.weight.size() || a.bias.size() != b.bias.size()) {
      throw DimensionError("gradient shape mismatch at layer " + std::to_string(l));
    }
    view(a.weight) += view(b.weight);
    for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += b.bias[i];
  }
}

void MlpGradients::scale(double factor) {
  for (auto& l : layers) {
    for (double& v : l.weight.values()) v *= factor;
    for (double& v : l.bias) v *= factor;
  }
}

ForwardStack mlp_forward(const MlpParams& params, const Matrix& x) {
  if (params.layers.empty()) throw ArgumentError("mlp_forward: network has no layers");
  ForwardStack stack;
  stack.inputs.reserve(params.layers.size());
  stack.pre.reserve(params.layers.size());
  stack.inputs.push_back(x);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    const Matrix& in = stack.inputs.back();
    if (in.cols() != layer.in_width()) {
      throw DimensionError("layer " + std::to_string(l) + " expects input width " +
                           std::to_string(layer.in_width()) + ", got " + std::to_string(in.cols()));
    }
    Matrix pre;
    Matrix post;
    apply_layer(layer, in, pre, &post);
    stack.pre.push_back(std::move(pre));
    if (l + 1 < params.layers.size()) {
      stack.inputs.push_back(std::move(post));
    } else {
      stack.output = std::move(post);
    }
  }
  stack.shape_signature = signature_of(params, x.rows());
  return stack;
}

Matrix mlp_predict(const MlpParams& params, const Matrix& x) {
  if (params.layers.empty()) throw ArgumentError("mlp_predict: network has no layers");
  if (x.cols() != params.input_width()) {
    throw DimensionError("layer 0 expects input width " + std::to_string(params.input_width()) +
                         ", got " + std::to_string(x.cols()));
  }
  Matrix out(x.rows(), params.output_width());
  for (std::size_t start = 0; start < x.rows(); start += kPredictChunk) {
    const std::size_t stop = std::min(x.rows(), start + kPredictChunk);
    Matrix cur(stop - start, x.cols());
    std::copy(x.data() + start * x.cols(), x.data() + stop * x.cols(), cur.data());
    for (const auto& layer : params.layers) {
      Matrix pre;
      Matrix post;
      apply_layer(layer, cur, pre, &post);
      cur = std::move(post);
    }
    std::copy(cur.data(), cur.data() + cur.size(), out.data() + start * out.cols());
  }
  return out;
}

BackwardResult mlp_backward(const MlpParams& params, const ForwardStack& stack,
                            const Matrix& grad_output) {
  const std::size_t n_layers = params.layers.size();
  const std::size_t rows = stack.inputs.empty() ? 0 : stack.inputs.front().rows();
  if (stack.inputs.size() != n_layers || stack.pre.size() != n_layers ||
      stack.shape_signature != signature_of(params, rows)) {
    throw ConsistencyError("mlp_backward: forward stack does not belong to these parameters");
  }
  if (grad_output.rows() != stack.output.rows() || grad_output.cols() != stack.output.cols()) {
    throw DimensionError("mlp_backward: grad_output is " + std::to_string(grad_output.rows()) + "x" +
                         std::to_string(grad_output.cols()) + ", output is " +
                         std::to_string(stack.output.rows()) + "x" +
                         std::to_string(stack.output.cols()));
  }

  BackwardResult result;
  result.params.layers.resize(n_layers);
  Matrix grad = grad_output;
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = params.layers[l];
    if (layer.activation == Activation::relu) {
      const auto pre = stack.pre[l].values();
      auto g = grad.values();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(pre[i] > 0.0)) g[i] = 0.0;
      }
    }
    auto& lg = result.params.layers[l];
    lg.weight = Matrix(layer.out_width(), layer.in_width());
    view(lg.weight).noalias() = view(grad).transpose() * view(stack.inputs[l]);
    lg.bias.assign(layer.out_width(), 0.0);
    detail::VectorView(lg.bias.data(), static_cast<Eigen::Index>(lg.bias.size())) =
        view(grad).colwise().sum().transpose();
    Matrix next(grad.rows(), layer.in_width());
    view(next).noalias() = view(grad) * view(layer.weight);
    grad = std::move(next);
  }
  result.input = std::move(grad);
  return result;
}

std::vector<std::span<double>> parameter_spans(MlpParams& params) {
  std::vector<std::span<double>> spans;
  for (auto& l : params.layers) {
    spans.push_back(l.weight.values());
    spans.push_back(l.bias);
  }
  return spans;
}

std::vector<std::span<const double>> gradient_spans(const MlpGradients& grads) {
  std::vector<std::span<const double>> spans;
  for (const auto& l : grads.layers) {
    spans.push_back(l.weight.values());
    spans.push_back(l.bias);
  }
  return spans;
}

std::vector<std::span<double>> gradient_spans(MlpGradients& grads) {
  std::vector<std::span<double>> spans;
  for (auto& l : grads.layers) {
    spans.push_back(l.weight.values());
    spans.push_back(l.bias);
  }
  return spans;
}

}  // namespace dcc
