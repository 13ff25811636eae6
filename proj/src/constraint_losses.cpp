#include "dcc/constraint_losses.hpp"

#include <cmath>
#include <string>

#include "dcc/error.hpp"

namespace dcc {

namespace {

constexpr double kLogFloor = 1e-12;

void check_rows(const Matrix& q, std::size_t i, const char* what) {
  if (i >= q.rows()) {
    throw DimensionError(std::string(what) + ": row " + std::to_string(i) + " outside Q with " +
                         std::to_string(q.rows()) + " rows");
  }
}

// Adds scale * q_src to grad row dst.
void axpy_row(Matrix& grad, std::size_t dst, const Matrix& q, std::size_t src, double scale) {
  auto g = grad.row(dst);
  const auto s = q.row(src);
  for (std::size_t j = 0; j < g.size(); ++j) g[j] += scale * s[j];
}

// -log(x) over pairs, with x = sim (must-link) or 1 - sim (cannot-link).
template <bool kCannot>
AssignmentLoss pair_log_loss(const Matrix& q, std::span<const IndexPair> pairs, const char* what) {
  AssignmentLoss out{0.0, Matrix(q.rows(), q.cols())};
  for (const auto& p : pairs) {
    check_rows(q, p.a, what);
    check_rows(q, p.b, what);
    const double sim = pair_similarity(q, p);
    const double arg = kCannot ? 1.0 - sim : sim;
    if (arg < kLogFloor || arg > 1.0) {
      out.value -= std::log(arg < kLogFloor ? kLogFloor : 1.0);
      continue;
    }
    out.value -= std::log(arg);
    // d(-log arg)/d q_a = -(d arg/d sim) q_b / arg
    const double scale = (kCannot ? 1.0 : -1.0) / arg;
    axpy_row(out.grad, p.a, q, p.b, scale);
    axpy_row(out.grad, p.b, q, p.a, scale);
  }
  return out;
}

template <typename Fn>
void check_psv(const Matrix& q, std::span<const int> psv, Fn&& on_entry) {
  if (psv.size() != q.rows()) {
    throw DimensionError("protected-status vector has " + std::to_string(psv.size()) + " entries, Q has " +
                         std::to_string(q.rows()) + " rows");
  }
  for (std::size_t i = 0; i < psv.size(); ++i) on_entry(i, psv[i]);
}

}  // namespace

double pair_similarity(const Matrix& q, const IndexPair& p) { return dot(q.row(p.a), q.row(p.b)); }

AssignmentLoss ml_loss(const Matrix& q, std::span<const IndexPair> must_links) {
  return pair_log_loss<false>(q, must_links, "ml_loss");
}

AssignmentLoss cl_loss(const Matrix& q, std::span<const IndexPair> cannot_links) {
  return pair_log_loss<true>(q, cannot_links, "cl_loss");
}

AssignmentLoss difficulty_loss(const Matrix& q, std::span<const double> difficulty) {
  if (difficulty.size() != q.rows()) {
    throw DimensionError("difficulty vector has " + std::to_string(difficulty.size()) + " entries, Q has " +
                         std::to_string(q.rows()) + " rows");
  }
  AssignmentLoss out{0.0, Matrix(q.rows(), q.cols())};
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const double m = difficulty[i];
    if (m == 0.0) continue;
    const auto row = q.row(i);
    out.value -= m * dot(row, row);
    auto g = out.grad.row(i);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = -2.0 * m * row[j];
  }
  return out;
}

AssignmentLoss triplet_loss(const Matrix& q, std::span<const Triplet> triplets, double theta) {
  if (!(theta > 0.0)) throw ArgumentError("triplet margin must be positive");
  AssignmentLoss out{0.0, Matrix(q.rows(), q.cols())};
  for (const auto& t : triplets) {
    check_rows(q, t.anchor, "triplet_loss");
    check_rows(q, t.positive, "triplet_loss");
    check_rows(q, t.negative, "triplet_loss");
    const double hinge = pair_similarity(q, {t.anchor, t.negative}) - pair_similarity(q, {t.anchor, t.positive}) + theta;
    if (hinge <= 0.0) continue;
    out.value += hinge;
    axpy_row(out.grad, t.anchor, q, t.negative, 1.0);
    axpy_row(out.grad, t.anchor, q, t.positive, -1.0);
    axpy_row(out.grad, t.negative, q, t.anchor, 1.0);
    axpy_row(out.grad, t.positive, q, t.anchor, -1.0);
  }
  return out;
}

AssignmentLoss global_size_loss(const Matrix& q, std::size_t k) {
  if (q.cols() != k) {
    throw DimensionError("global_size_loss: Q has " + std::to_string(q.cols()) + " columns, k = " +
                         std::to_string(k));
  }
  AssignmentLoss out{0.0, Matrix(q.rows(), k)};
  if (q.rows() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(q.rows());
  std::vector<double> mean(k, 0.0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t c = 0; c < k; ++c) mean[c] += q(i, c) * inv_n;
  }
  std::vector<double> slope(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double dev = mean[c] - 1.0 / static_cast<double>(k);
    out.value += dev * dev;
    slope[c] = 2.0 * dev * inv_n;
  }
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t c = 0; c < k; ++c) out.grad(i, c) = slope[c];
  }
  return out;
}

AssignmentLoss cardinality_loss(const Matrix& q, std::span<const int> psv) {
  std::size_t group_m = 0;
  check_psv(q, psv, [&](std::size_t, int g) { group_m += g == 1; });
  if (group_m == 0 || group_m == psv.size()) {
    throw ArgumentError("equal-mode cardinality needs instances from both protected groups");
  }
  const std::size_t k = q.cols();
  const double inv_n = 1.0 / static_cast<double>(q.rows());
  std::vector<double> diff(k, 0.0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const double sign = psv[i] == 1 ? 1.0 : -1.0;
    for (std::size_t c = 0; c < k; ++c) diff[c] += sign * q(i, c) * inv_n;
  }
  AssignmentLoss out{0.0, Matrix(q.rows(), k)};
  for (std::size_t c = 0; c < k; ++c) out.value += diff[c] * diff[c];
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const double sign = psv[i] == 1 ? 1.0 : -1.0;
    for (std::size_t c = 0; c < k; ++c) out.grad(i, c) = 2.0 * diff[c] * sign * inv_n;
  }
  return out;
}

AssignmentLoss cardinality_bound_loss(const Matrix& q, std::span<const int> psv, double lower, double upper) {
  if (!(lower >= 0.0 && lower <= upper)) throw ArgumentError("cardinality bounds need 0 <= L <= U");
  check_psv(q, psv, [](std::size_t, int) {});
  const std::size_t k = q.cols();
  std::vector<double> mass(k, 0.0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    if (psv[i] != 1) continue;
    for (std::size_t c = 0; c < k; ++c) mass[c] += q(i, c);
  }
  AssignmentLoss out{0.0, Matrix(q.rows(), k)};
  std::vector<double> slope(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const double under = std::min(0.0, mass[c] - lower);
    const double over = std::max(0.0, mass[c] - upper);
    out.value += under * under + over * over;
    slope[c] = 2.0 * (under + over);
  }
  for (std::size_t i = 0; i < q.rows(); ++i) {
    if (psv[i] != 1) continue;
    for (std::size_t c = 0; c < k; ++c) out.grad(i, c) = slope[c];
  }
  return out;
}

std::vector<IndexPair> evaluate_horn_rules(const Matrix& q, std::span<const HornRule> rules, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ArgumentError("Horn threshold must lie in (0, 1)");
  std::vector<IndexPair> heads;
  for (const auto& rule : rules) {
    bool satisfied = !rule.body.empty();
    for (const auto& lit : rule.body) {
      check_rows(q, lit.a, "evaluate_horn_rules");
      check_rows(q, lit.b, "evaluate_horn_rules");
      if (!(pair_similarity(q, lit) > tau)) {
        satisfied = false;
        break;
      }
    }
    if (satisfied) heads.push_back(rule.head);
  }
  return heads;
}

}  // namespace dcc
