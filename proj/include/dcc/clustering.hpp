#pragma once

#include <cstddef>
#include <vector>

#include "dcc/data_io.hpp"
#include "dcc/matrix.hpp"
#include "dcc/rng.hpp"

namespace dcc {

/// Cluster centers in latent space and the Student-t degrees of freedom.
struct ClusterModel {
  Matrix centroids;  // k x latent
  double dof = 1.0;

  std::size_t k() const { return centroids.rows(); }

  friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

/// A loss over soft assignments and its gradient with respect to Q.
struct AssignmentLoss {
  double value = 0.0;
  Matrix grad;  // same shape as Q
};

struct KMeansResult {
  Matrix centroids;
  Labels labels;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::size_t reseeds = 0;
  /// Inertia after each assignment step of the winning restart.
  std::vector<double> inertia_trace;
};

/// Lloyd's algorithm from k-means++ seeds, best of `restarts` by inertia.
/// A cluster that empties is re-seeded at the point farthest from its center.
KMeansResult kmeans(const Matrix& z, std::size_t k, std::size_t restarts, std::size_t max_iters,
                    SeededRng& rng);

/// Student-t similarity of each row of `z` to each centroid, rows normalized.
Matrix soft_assign(const ClusterModel& model, const Matrix& z);

/// Squares Q, divides by soft cluster frequency, renormalizes rows.
Matrix target_distribution(const Matrix& q);

/// KL(P || Q) summed over rows; P is a constant target. q is floored at 1e-12
/// inside the log and floored entries get no gradient.
AssignmentLoss kl_cluster_loss(const Matrix& p, const Matrix& q);

struct SoftAssignGradients {
  Matrix latent;     // d loss / d z, n x latent
  Matrix centroids;  // d loss / d mu, k x latent
};

/// Chains d loss / d Q through the Student-t kernel into Z and the centroids.
SoftAssignGradients soft_assign_backward(const ClusterModel& model, const Matrix& z, const Matrix& q,
                                         const Matrix& grad_q);

/// Row-wise argmax, lowest column wins ties.
Labels hard_assign(const Matrix& q);

}  // namespace dcc
