#include "dcc/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dcc/error.hpp"

namespace dcc {

namespace {

constexpr double kLogFloor = 1e-12;

// Nearest centroid per row (lowest index on ties); returns total inertia.
double assign_nearest(const Matrix& z, const Matrix& centroids, Labels& labels,
                      std::vector<double>& dist) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_j = 0;
    for (std::size_t j = 0; j < centroids.rows(); ++j) {
      const double d = squared_distance(z.row(i), centroids.row(j));
      if (d < best) {
        best = d;
        best_j = static_cast<int>(j);
      }
    }
    labels[i] = best_j;
    dist[i] = best;
    inertia += best;
  }
  return inertia;
}

Matrix kmeans_plus_plus(const Matrix& z, std::size_t k, SeededRng& rng) {
  const std::size_t n = z.rows();
  Matrix centers(k, z.cols());
  std::vector<double> closest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.uniform_index(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double d : closest) total += d;
      if (total > 0.0) {
        double r = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          r -= closest[i];
          if (r < 0.0) {
            pick = i;
            break;
          }
        }
      } else {
        pick = rng.uniform_index(n);
      }
    }
    std::copy(z.row(pick).begin(), z.row(pick).end(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) {
      closest[i] = std::min(closest[i], squared_distance(z.row(i), centers.row(c)));
    }
  }
  return centers;
}

KMeansResult lloyd(const Matrix& z, Matrix centers, std::size_t max_iters) {
  const std::size_t n = z.rows();
  const std::size_t k = centers.rows();
  KMeansResult res;
  res.labels.assign(n, -1);
  Labels labels(n, 0);
  std::vector<double> dist(n);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    const double inertia = assign_nearest(z, centers, labels, dist);
    res.inertia_trace.push_back(inertia);
    res.inertia = inertia;
    res.iterations = iter + 1;
    const bool fixpoint = labels == res.labels;
    res.labels = labels;
    if (fixpoint) break;

    centers.fill(0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = centers.row(static_cast<std::size_t>(labels[i]));
      const auto x = z.row(i);
      for (std::size_t d = 0; d < c.size(); ++d) c[d] += x[d];
      ++counts[static_cast<std::size_t>(labels[i])];
    }
    for (std::size_t j = 0; j < k; ++j) {
      auto c = centers.row(j);
      if (counts[j] > 0) {
        for (double& v : c) v /= static_cast<double>(counts[j]);
        continue;
      }
      // Empty cluster: move it onto the worst-served point.
      const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      std::copy(z.row(far).begin(), z.row(far).end(), c.begin());
      dist[far] = 0.0;
      ++res.reseeds;
    }
  }
  res.centroids = std::move(centers);
  return res;
}

}  // namespace

KMeansResult kmeans(const Matrix& z, std::size_t k, std::size_t restarts, std::size_t max_iters,
                    SeededRng& rng) {
  if (k == 0) throw ArgumentError("kmeans: k must be positive");
  if (k > z.rows()) {
    throw ArgumentError("kmeans: k = " + std::to_string(k) + " exceeds " + std::to_string(z.rows()) +
                        " points");
  }
  if (restarts == 0) throw ArgumentError("kmeans: need at least one restart");
  if (max_iters == 0) throw ArgumentError("kmeans: need at least one iteration");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    auto run = lloyd(z, kmeans_plus_plus(z, k, rng), max_iters);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

Matrix soft_assign(const ClusterModel& model, const Matrix& z) {
  if (z.cols() != model.centroids.cols()) {
    throw DimensionError("soft_assign: latent width " + std::to_string(z.cols()) +
                         " does not match centroid width " + std::to_string(model.centroids.cols()));
  }
  const double v = model.dof;
  const double power = -(v + 1.0) / 2.0;
  Matrix q(z.rows(), model.k());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = q.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < model.k(); ++j) {
      const double d = squared_distance(z.row(i), model.centroids.row(j));
      row[j] = v == 1.0 ? 1.0 / (1.0 + d) : std::pow(1.0 + d / v, power);
      s += row[j];
    }
    for (double& x : row) x /= s;
  }
  return q;
}

Matrix target_distribution(const Matrix& q) {
  const std::size_t k = q.cols();
  std::vector<double> freq(k, 0.0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t j = 0; j < k; ++j) freq[j] += q(i, j);
  }
  Matrix p(q.rows(), k);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double w = freq[j] > 0.0 ? q(i, j) * q(i, j) / freq[j] : 0.0;
      p(i, j) = w;
      s += w;
    }
    if (s > 0.0) {
      for (std::size_t j = 0; j < k; ++j) p(i, j) /= s;
    }
  }
  return p;
}

AssignmentLoss kl_cluster_loss(const Matrix& p, const Matrix& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw DimensionError("kl_cluster_loss: P and Q shapes differ");
  }
  AssignmentLoss out;
  out.grad = Matrix(q.rows(), q.cols());
  const auto pv = p.values();
  const auto qv = q.values();
  auto g = out.grad.values();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (pv[i] <= 0.0) continue;
    const double qc = std::max(qv[i], kLogFloor);
    out.value += pv[i] * (std::log(pv[i]) - std::log(qc));
    if (qv[i] >= kLogFloor) g[i] = -pv[i] / qv[i];
  }
  return out;
}

SoftAssignGradients soft_assign_backward(const ClusterModel& model, const Matrix& z, const Matrix& q,
                                         const Matrix& grad_q) {
  const std::size_t n = z.rows();
  const std::size_t k = model.k();
  const std::size_t dim = z.cols();
  if (q.rows() != n || q.cols() != k || grad_q.rows() != n || grad_q.cols() != k) {
    throw DimensionError("soft_assign_backward: shape mismatch");
  }
  const double v = model.dof;
  const double power = -(v + 1.0) / 2.0;
  SoftAssignGradients out{Matrix(n, dim), Matrix(k, dim)};
  std::vector<double> w(k);
  std::vector<double> dist(k);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      dist[j] = squared_distance(z.row(i), model.centroids.row(j));
      w[j] = std::pow(1.0 + dist[j] / v, power);
      s += w[j];
    }
    double inner = 0.0;
    for (std::size_t j = 0; j < k; ++j) inner += grad_q(i, j) * q(i, j);
    auto dz = out.latent.row(i);
    const auto zi = z.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      const double dw = (grad_q(i, j) - inner) / s;
      const double dd = dw * (-(v + 1.0) / (2.0 * v)) * w[j] / (1.0 + dist[j] / v);
      if (dd == 0.0) continue;
      auto dmu = out.centroids.row(j);
      const auto mu = model.centroids.row(j);
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = 2.0 * dd * (zi[d] - mu[d]);
        dz[d] += diff;
        dmu[d] -= diff;
      }
    }
  }
  return out;
}

Labels hard_assign(const Matrix& q) {
  Labels labels(q.rows(), 0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const auto row = q.row(i);
    labels[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return labels;
}

}  // namespace dcc
