#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dcc/data_io.hpp"
#include "dcc/matrix.hpp"

namespace dcc {

/// counts(c, k) = number of instances with true class c in predicted cluster k.
/// Label values are compacted to 0..C-1 / 0..K-1 in sorted order.
struct ContingencyTable {
  std::vector<std::vector<std::size_t>> counts;
  std::size_t total = 0;

  std::size_t classes() const { return counts.size(); }
  std::size_t clusters() const { return counts.empty() ? 0 : counts.front().size(); }

  static ContingencyTable build(std::span<const int> truth, std::span<const int> predicted);
};

struct Assignment {
  std::vector<std::size_t> column_for_row;
  double cost = 0.0;
};

/// Minimum-cost perfect matching (Kuhn-Munkres with potentials, O(n^3)).
/// Rectangular input is padded with zero-cost dummy rows/columns; the
/// returned mapping covers the padded square.
Assignment hungarian(const Matrix& cost);

/// Mutual information over max(H(l), H(c)), natural log. 1 when both
/// partitions are a single cluster.
double nmi(std::span<const int> truth, std::span<const int> predicted);

/// Best one-to-one cluster-to-class match fraction.
double accuracy(std::span<const int> truth, std::span<const int> predicted);

/// Each prediction replaced by the class its cluster is matched to under the
/// accuracy-maximizing matching; -1 for clusters left unmatched.
std::vector<int> matched_predictions(std::span<const int> truth, std::span<const int> predicted);

struct PairedRun {
  double constrained = 0.0;
  double unconstrained = 0.0;
};

/// Fraction of pairs where the unconstrained run scored strictly higher.
double negative_ratio(std::span<const PairedRun> runs);

}  // namespace dcc
