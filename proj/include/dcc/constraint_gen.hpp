#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcc/constraints.hpp"
#include "dcc/data_io.hpp"
#include "dcc/matrix.hpp"
#include "dcc/rng.hpp"

namespace dcc {

/// Undirected concept graph with dataset classes pinned to nodes.
class OntologyGraph {
 public:
  std::size_t add_node(const std::string& name);
  void add_edge(const std::string& a, const std::string& b);
  void map_class(int class_id, const std::string& node);

  std::size_t node_count() const { return names_.size(); }
  const std::map<int, std::size_t>& class_nodes() const { return class_nodes_; }

  /// Edge count of the shortest path between the nodes of two classes.
  std::size_t distance(int class_i, int class_j) const;

  /// `node_a node_b` per line plus `class_id node_name` per line.
  static OntologyGraph load(const std::filesystem::path& edges, const std::filesystem::path& class_map);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::map<int, std::size_t> class_nodes_;
};

/// 1 / (d + 1) for shortest-path length d.
double ontology_similarity(const OntologyGraph& graph, int class_i, int class_j);

struct TripletGenConfig {
  double theta_p = 0.5;
  double theta_n = 0.3;
  std::size_t count = 1000;
  std::size_t max_attempts = 1'000'000;

  void validate() const;
};

/// `count` distinct random pairs: same label gives a must-link, else cannot-link.
ConstraintSet pairwise_from_labels(std::span<const int> labels, std::size_t count, SeededRng& rng);

/// Must-links closed under transitivity and cannot-links expanded across the
/// must-link components they join. Output pairs are canonical and sorted.
ConstraintSet close_constraints(std::span<const IndexPair> must_links, std::span<const IndexPair> cannot_links,
                                std::size_t n);

struct WeakLearnerConfig {
  std::size_t restarts = 5;
  std::size_t max_iters = 100;
  double easy_confidence = 1.0;
  double hard_confidence = 0.1;
};

/// k-means on raw features; instances whose matched cluster disagrees with
/// their label are marked hard (-0.1), the rest easy (+1).
std::vector<double> difficulty_from_weak_learner(const Dataset& dataset, std::size_t k, SeededRng& rng,
                                                 const WeakLearnerConfig& config = {});

/// For each anchor, two random others; the nearer one in `z` is the positive
/// (lower index on ties).
std::vector<Triplet> triplets_from_embedding(const Matrix& z, std::size_t count, SeededRng& rng);

/// Rejection-samples triplets from `pool` whose class similarities satisfy
/// sim(a,p) > theta_p, sim(a,n) < theta_n and sim(p,n) < theta_n. theta_p = 1
/// is read as sim(a,p) >= 1, i.e. same class.
std::vector<Triplet> triplets_from_ontology(std::span<const int> labels, std::span<const std::size_t> pool,
                                            const OntologyGraph& graph, const TripletGenConfig& config,
                                            SeededRng& rng);

/// True iff the triplet's classes pass all three threshold predicates.
bool ontology_triplet_admissible(const OntologyGraph& graph, const TripletGenConfig& config, int anchor_class,
                                 int positive_class, int negative_class);

/// Appends ceil(degree * (|ML| + |CL|)) fresh pairs with their true relation
/// flipped: truly-together pairs become cannot-links and vice versa.
ConstraintSet inject_noise(const ConstraintSet& clean, std::span<const int> labels, double degree, SeededRng& rng);

}  // namespace dcc
