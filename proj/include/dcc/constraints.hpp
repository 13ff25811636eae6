#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

namespace dcc {

struct IndexPair {
  std::size_t a = 0;
  std::size_t b = 0;

  friend bool operator==(const IndexPair&, const IndexPair&) = default;
  friend auto operator<=>(const IndexPair&, const IndexPair&) = default;
};

/// Same pair with the smaller index first.
inline IndexPair canonical(IndexPair p) { return p.a <= p.b ? p : IndexPair{p.b, p.a}; }

struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Protected-status balance over clusters. psv[i] is 1 for the first group
/// ("M"), 0 for the second ("F").
struct CardinalitySpec {
  enum class Mode { equal, bounds };
  std::vector<int> psv;
  Mode mode = Mode::equal;
  double lower = 0.0;
  double upper = 0.0;

  friend bool operator==(const CardinalitySpec&, const CardinalitySpec&) = default;
};

/// body[0] and body[1] and ... imply head, where body literals are
/// together-relations and head is an apart-relation.
struct HornRule {
  std::vector<IndexPair> body;
  IndexPair head;

  friend bool operator==(const HornRule&, const HornRule&) = default;
};

struct ConstraintSet {
  std::vector<IndexPair> must_links;
  std::vector<IndexPair> cannot_links;
  std::vector<Triplet> triplets;
  std::optional<std::vector<double>> difficulty;  // M, one entry per instance
  bool global_size = false;
  std::optional<CardinalitySpec> cardinality;
  std::vector<HornRule> horn_rules;

  bool has_pairwise() const { return !must_links.empty() || !cannot_links.empty(); }
  bool has_triplets() const { return !triplets.empty(); }
  bool empty() const;

  /// Checks every invariant against a dataset of `n` instances.
  void validate(std::size_t n) const;

  friend bool operator==(const ConstraintSet&, const ConstraintSet&) = default;
};

/// Whitespace-separated records, one per line, `#` comments:
///   ML i j | CL i j | TRI a p n | DIF i m | PSV i g | HORN a b [c d ...] -> x y
/// `n` sizes the DIF and PSV vectors (unlisted instances get 0).
ConstraintSet read_constraints(const std::filesystem::path& path, std::size_t n);
void write_constraints(const std::filesystem::path& path, const ConstraintSet& set);

/// Concatenates record lists; `extra` difficulty/cardinality override when set.
ConstraintSet merge(ConstraintSet base, const ConstraintSet& extra);

}  // namespace dcc
