#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dcc/matrix.hpp"

namespace dcc {

using ParamList = std::vector<std::span<double>>;
using GradList = std::vector<std::span<const double>>;

/// Adam with bias correction. Moments mirror the parameter buffers they track.
struct AdamState {
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 0.001;
  std::vector<AlignedBuffer> first_moment;
  std::vector<AlignedBuffer> second_moment;

  static AdamState for_params(const ParamList& params, double learning_rate = 0.001);

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Throws NumericError without touching anything if a gradient is non-finite.
void adam_step(AdamState& state, const ParamList& params, const GradList& grads);

/// Central differences (L(p+h) - L(p-h)) / 2h for every entry of `params`.
/// The buffers are perturbed in place and restored; `loss` must read them.
std::vector<std::vector<double>> finite_diff_grad(const std::function<double()>& loss,
                                                  const ParamList& params, double h = 1e-5);

/// Flat-vector convenience form.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& loss,
                                     std::vector<double> params, double h = 1e-5);

}  // namespace dcc
