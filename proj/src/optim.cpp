#include "dcc/optim.hpp"

#include <cmath>
#include <string>

#include "dcc/error.hpp"

namespace dcc {

AdamState AdamState::for_params(const ParamList& params, double learning_rate) {
  AdamState state;
  state.learning_rate = learning_rate;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.size(), 0.0);
    state.second_moment.emplace_back(p.size(), 0.0);
  }
  return state;
}

void adam_step(AdamState& state, const ParamList& params, const GradList& grads) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameter blocks, " +
                         std::to_string(grads.size()) + " gradient blocks, " +
                         std::to_string(state.first_moment.size()) + " moment blocks");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() || params[b].size() != state.first_moment[b].size()) {
      throw DimensionError("adam_step: block " + std::to_string(b) + " shape mismatch");
    }
    for (double g : grads[b]) {
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient in block " + std::to_string(b));
      }
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    auto p = params[b];
    const auto g = grads[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

std::vector<std::vector<double>> finite_diff_grad(const std::function<double()>& loss,
                                                  const ParamList& params, double h) {
  if (!(h > 0.0)) throw ArgumentError("finite_diff_grad: step must be positive");
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + h;
      const double up = loss();
      p[i] = saved - h;
      const double down = loss();
      p[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_grad: non-finite loss at block " + std::to_string(b) +
                           " entry " + std::to_string(i));
      }
      g[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& loss,
                                     std::vector<double> params, double h) {
  const ParamList blocks{std::span<double>(params)};
  auto g = finite_diff_grad([&] { return loss(params); }, blocks, h);
  return std::move(g.front());
}

}  // namespace dcc
