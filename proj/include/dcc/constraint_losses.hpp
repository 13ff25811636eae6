#pragma once

#include <span>
#include <vector>

#include "dcc/clustering.hpp"
#include "dcc/constraints.hpp"
#include "dcc/matrix.hpp"

namespace dcc {

// Every loss takes soft assignments Q (rows = instances referenced by the
// constraint indices) and returns the loss with its gradient w.r.t. Q.
// Log arguments are clamped to [1e-12, 1]; a clamped term has zero gradient.

/// -sum log(sum_j q_aj q_bj)
AssignmentLoss ml_loss(const Matrix& q, std::span<const IndexPair> must_links);

/// -sum log(1 - sum_j q_aj q_bj)
AssignmentLoss cl_loss(const Matrix& q, std::span<const IndexPair> cannot_links);

/// -sum_i M_i sum_j q_ij^2: hard instances (M<0) are pushed toward flat
/// assignments, easy ones (M>0) toward one-hot.
AssignmentLoss difficulty_loss(const Matrix& q, std::span<const double> difficulty);

/// sum max(d(a,n) - d(a,p) + theta, 0) with d(x,y) = sum_j q_xj q_yj.
AssignmentLoss triplet_loss(const Matrix& q, std::span<const Triplet> triplets, double theta);

/// sum_c (mean_i q_ic - 1/k)^2 over the rows of Q.
AssignmentLoss global_size_loss(const Matrix& q, std::size_t k);

/// sum_c (sum_{psv=1} q_ic / n - sum_{psv=0} q_ic / n)^2
AssignmentLoss cardinality_loss(const Matrix& q, std::span<const int> psv);

/// sum_c min(0, S_c - L)^2 + max(0, S_c - U)^2 with S_c = sum_{psv=1} q_ic.
AssignmentLoss cardinality_bound_loss(const Matrix& q, std::span<const int> psv, double lower, double upper);

/// Pair similarity sum_j q_aj q_bj.
double pair_similarity(const Matrix& q, const IndexPair& p);

/// Heads of every rule whose body pairs all have similarity above `tau`.
std::vector<IndexPair> evaluate_horn_rules(const Matrix& q, std::span<const HornRule> rules, double tau = 0.5);

}  // namespace dcc
