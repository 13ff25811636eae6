#include "dcc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dcc/error.hpp"

namespace dcc {

namespace {

std::vector<std::size_t> compact(std::span<const int> labels, std::size_t& distinct) {
  std::vector<int> values(labels.begin(), labels.end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  distinct = values.size();
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i] = static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), labels[i]) - values.begin());
  }
  return out;
}

void check_lengths(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw ArgumentError("label vectors differ in length: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
  }
  if (a.empty()) throw ArgumentError("label vectors are empty");
}

double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  }
  return h;
}

}  // namespace

namespace {

// Rows are clusters so the matching reads cluster -> class.
Assignment match_clusters(const ContingencyTable& table) {
  Matrix cost(table.clusters(), table.classes());
  for (std::size_t c = 0; c < table.classes(); ++c) {
    for (std::size_t k = 0; k < table.clusters(); ++k) cost(k, c) = -static_cast<double>(table.counts[c][k]);
  }
  return hungarian(cost);
}

}  // namespace

ContingencyTable ContingencyTable::build(std::span<const int> truth, std::span<const int> predicted) {
  check_lengths(truth, predicted);
  std::size_t n_classes = 0;
  std::size_t n_clusters = 0;
  const auto t = compact(truth, n_classes);
  const auto p = compact(predicted, n_clusters);
  ContingencyTable table;
  table.counts.assign(n_classes, std::vector<std::size_t>(n_clusters, 0));
  for (std::size_t i = 0; i < t.size(); ++i) ++table.counts[t[i]][p[i]];
  table.total = t.size();
  return table;
}

Assignment hungarian(const Matrix& cost) {
  for (double v : cost.values()) {
    if (!std::isfinite(v)) throw ArgumentError("hungarian: non-finite cost entry");
  }
  const std::size_t n = std::max(cost.rows(), cost.cols());
  if (n == 0) return {};
  auto at = [&](std::size_t r, std::size_t c) {
    return (r < cost.rows() && c < cost.cols()) ? cost(r, c) : 0.0;
  };

  // 1-based potentials formulation; way/match index 0 is a sentinel column.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::vector<double> min_slack(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[col0] = true;
      const std::size_t r0 = match[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double cur = at(r0 - 1, c - 1) - u[r0] - v[c];
        if (cur < min_slack[c]) {
          min_slack[c] = cur;
          way[c] = col0;
        }
        if (min_slack[c] < delta) {
          delta = min_slack[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          min_slack[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  Assignment result;
  result.column_for_row.assign(n, 0);
  for (std::size_t c = 1; c <= n; ++c) result.column_for_row[match[c] - 1] = c - 1;
  for (std::size_t r = 0; r < n; ++r) result.cost += at(r, result.column_for_row[r]);
  return result;
}

double nmi(std::span<const int> truth, std::span<const int> predicted) {
  const auto table = ContingencyTable::build(truth, predicted);
  const double n = static_cast<double>(table.total);
  std::vector<double> row_sum(table.classes(), 0.0), col_sum(table.clusters(), 0.0);
  for (std::size_t c = 0; c < table.classes(); ++c) {
    for (std::size_t k = 0; k < table.clusters(); ++k) {
      row_sum[c] += static_cast<double>(table.counts[c][k]);
      col_sum[k] += static_cast<double>(table.counts[c][k]);
    }
  }
  const double h_truth = entropy(row_sum, n);
  const double h_pred = entropy(col_sum, n);
  const double denom = std::max(h_truth, h_pred);
  if (denom <= 0.0) return 1.0;
  double mi = 0.0;
  for (std::size_t c = 0; c < table.classes(); ++c) {
    for (std::size_t k = 0; k < table.clusters(); ++k) {
      const double nck = static_cast<double>(table.counts[c][k]);
      if (nck > 0.0) mi += (nck / n) * std::log(nck * n / (row_sum[c] * col_sum[k]));
    }
  }
  return std::clamp(mi / denom, 0.0, 1.0);
}

double accuracy(std::span<const int> truth, std::span<const int> predicted) {
  const auto table = ContingencyTable::build(truth, predicted);
  const auto match = match_clusters(table);
  return -match.cost / static_cast<double>(table.total);
}

std::vector<int> matched_predictions(std::span<const int> truth, std::span<const int> predicted) {
  const auto table = ContingencyTable::build(truth, predicted);
  const auto match = match_clusters(table);

  std::vector<int> class_values(truth.begin(), truth.end());
  std::sort(class_values.begin(), class_values.end());
  class_values.erase(std::unique(class_values.begin(), class_values.end()), class_values.end());
  std::size_t n_clusters = 0;
  const auto cluster_idx = compact(predicted, n_clusters);

  std::vector<int> out(predicted.size(), -1);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const std::size_t cls = match.column_for_row[cluster_idx[i]];
    if (cls < class_values.size()) out[i] = class_values[cls];
  }
  return out;
}

double negative_ratio(std::span<const PairedRun> runs) {
  if (runs.empty()) throw ArgumentError("negative_ratio: no runs");
  const auto losses = std::count_if(runs.begin(), runs.end(),
                                    [](const PairedRun& r) { return r.unconstrained > r.constrained; });
  return static_cast<double>(losses) / static_cast<double>(runs.size());
}

}  // namespace dcc
