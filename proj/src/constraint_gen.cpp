#include "dcc/constraint_gen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_set>

#include "dcc/clustering.hpp"
#include "dcc/error.hpp"
#include "dcc/metrics.hpp"
#include "dcc/union_find.hpp"

namespace dcc {

namespace fs = std::filesystem;

namespace {

std::uint64_t pair_key(IndexPair p, std::size_t n) {
  const auto c = canonical(p);
  return static_cast<std::uint64_t>(c.a) * n + c.b;
}

IndexPair random_pair(std::size_t n, SeededRng& rng) {
  const std::size_t a = rng.uniform_index(n);
  std::size_t b = rng.uniform_index(n - 1);
  if (b >= a) ++b;
  return canonical({a, b});
}

std::vector<IndexPair> sorted_unique(std::vector<IndexPair> pairs) {
  for (auto& p : pairs) p = canonical(p);
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

}  // namespace

std::size_t OntologyGraph::add_node(const std::string& name) {
  const auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  names_.push_back(name);
  adjacency_.emplace_back();
  index_.emplace(name, names_.size() - 1);
  return names_.size() - 1;
}

void OntologyGraph::add_edge(const std::string& a, const std::string& b) {
  const auto ia = add_node(a);
  const auto ib = add_node(b);
  if (ia == ib) return;
  adjacency_[ia].push_back(ib);
  adjacency_[ib].push_back(ia);
}

void OntologyGraph::map_class(int class_id, const std::string& node) {
  const auto it = index_.find(node);
  if (it == index_.end()) throw GraphError("class " + std::to_string(class_id) + " maps to unknown node '" + node + "'");
  class_nodes_[class_id] = it->second;
}

std::size_t OntologyGraph::distance(int class_i, int class_j) const {
  const auto fi = class_nodes_.find(class_i);
  const auto fj = class_nodes_.find(class_j);
  if (fi == class_nodes_.end()) throw GraphError("class " + std::to_string(class_i) + " is not mapped to the ontology");
  if (fj == class_nodes_.end()) throw GraphError("class " + std::to_string(class_j) + " is not mapped to the ontology");
  const std::size_t src = fi->second;
  const std::size_t dst = fj->second;
  if (src == dst) return 0;
  std::vector<std::size_t> dist(names_.size(), static_cast<std::size_t>(-1));
  std::queue<std::size_t> frontier;
  dist[src] = 0;
  frontier.push(src);
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (auto v : adjacency_[u]) {
      if (dist[v] != static_cast<std::size_t>(-1)) continue;
      dist[v] = dist[u] + 1;
      if (v == dst) return dist[v];
      frontier.push(v);
    }
  }
  throw GraphError("no path between '" + names_[src] + "' and '" + names_[dst] + "'");
}

OntologyGraph OntologyGraph::load(const fs::path& edges, const fs::path& class_map) {
  OntologyGraph g;
  std::ifstream in(edges);
  if (!in) throw InputError("cannot open " + edges.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string a, b, extra;
    if (!(ss >> a) || a.front() == '#') continue;
    if (!(ss >> b) || (ss >> extra)) {
      throw FormatError(edges.string() + ": line " + std::to_string(line_no) + ": expected 'node_a node_b'");
    }
    g.add_edge(a, b);
  }
  std::ifstream cm(class_map);
  if (!cm) throw InputError("cannot open " + class_map.string());
  line_no = 0;
  while (std::getline(cm, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string id_tok, node, extra;
    if (!(ss >> id_tok) || id_tok.front() == '#') continue;
    int id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(id_tok, &used);
      if (used != id_tok.size()) throw std::invalid_argument(id_tok);
    } catch (const std::exception&) {
      throw FormatError(class_map.string() + ": line " + std::to_string(line_no) + ": bad class id");
    }
    if (!(ss >> node) || (ss >> extra)) {
      throw FormatError(class_map.string() + ": line " + std::to_string(line_no) + ": expected 'class_id node_name'");
    }
    g.map_class(id, node);
  }
  return g;
}

double ontology_similarity(const OntologyGraph& graph, int class_i, int class_j) {
  return 1.0 / (static_cast<double>(graph.distance(class_i, class_j)) + 1.0);
}

void TripletGenConfig::validate() const {
  if (!(theta_p > 0.0 && theta_p <= 1.0)) throw ArgumentError("theta_p must lie in (0, 1]");
  if (!(theta_n > 0.0 && theta_n < 1.0)) throw ArgumentError("theta_n must lie in (0, 1)");
  if (!(theta_n < theta_p)) throw ArgumentError("theta_n must be below theta_p");
  if (count == 0) throw ArgumentError("triplet count must be at least 1");
}

ConstraintSet pairwise_from_labels(std::span<const int> labels, std::size_t count, SeededRng& rng) {
  const std::size_t n = labels.size();
  if (count == 0) throw ArgumentError("pair count must be at least 1");
  const std::size_t distinct = n < 2 ? 0 : n * (n - 1) / 2;
  if (count > distinct) {
    throw ArgumentError("requested " + std::to_string(count) + " pairs but only " + std::to_string(distinct) +
                        " distinct pairs exist");
  }
  std::vector<IndexPair> picked;
  picked.reserve(count);
  if (count * 2 > distinct) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) picked.push_back({a, b});
    }
    rng.shuffle(std::span<IndexPair>(picked));
    picked.resize(count);
  } else {
    std::unordered_set<std::uint64_t> seen;
    while (picked.size() < count) {
      const auto p = random_pair(n, rng);
      if (seen.insert(pair_key(p, n)).second) picked.push_back(p);
    }
  }
  ConstraintSet out;
  for (const auto& p : picked) {
    (labels[p.a] == labels[p.b] ? out.must_links : out.cannot_links).push_back(p);
  }
  return out;
}

ConstraintSet close_constraints(std::span<const IndexPair> must_links, std::span<const IndexPair> cannot_links,
                                std::size_t n) {
  DisjointSet sets(n);
  for (const auto& p : must_links) {
    if (p.a >= n || p.b >= n) throw ArgumentError("must-link index outside the dataset");
    sets.unite(p.a, p.b);
  }
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[sets.find(i)].push_back(i);

  ConstraintSet out;
  // Only components touched by some constraint are expanded.
  std::vector<bool> touched(n, false);
  for (const auto& p : must_links) touched[sets.find(p.a)] = true;
  for (std::size_t root = 0; root < n; ++root) {
    if (!touched[root]) continue;
    const auto& comp = members[root];
    for (std::size_t x = 0; x < comp.size(); ++x) {
      for (std::size_t y = x + 1; y < comp.size(); ++y) out.must_links.push_back({comp[x], comp[y]});
    }
  }

  std::vector<IndexPair> component_pairs;
  for (const auto& p : cannot_links) {
    if (p.a >= n || p.b >= n) throw ArgumentError("cannot-link index outside the dataset");
    const auto ra = sets.find(p.a);
    const auto rb = sets.find(p.b);
    if (ra == rb) {
      throw ConsistencyError("cannot-link (" + std::to_string(p.a) + ", " + std::to_string(p.b) +
                             ") joins instances that must-links place together");
    }
    component_pairs.push_back(canonical({ra, rb}));
  }
  for (const auto& cp : sorted_unique(std::move(component_pairs))) {
    for (auto x : members[cp.a]) {
      for (auto y : members[cp.b]) out.cannot_links.push_back(canonical({x, y}));
    }
  }
  out.must_links = sorted_unique(std::move(out.must_links));
  out.cannot_links = sorted_unique(std::move(out.cannot_links));
  return out;
}

std::vector<double> difficulty_from_weak_learner(const Dataset& dataset, std::size_t k, SeededRng& rng,
                                                 const WeakLearnerConfig& config) {
  if (!dataset.labels) throw ArgumentError("difficulty generation needs labels");
  const auto& labels = *dataset.labels;
  std::vector<int> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (k != distinct.size()) {
    throw ArgumentError("weak learner k = " + std::to_string(k) + " but labels have " +
                        std::to_string(distinct.size()) + " classes");
  }
  const auto km = kmeans(dataset.features, k, config.restarts, config.max_iters, rng);
  const auto mapped = matched_predictions(labels, km.labels);
  std::vector<double> m(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    m[i] = mapped[i] == labels[i] ? config.easy_confidence : -config.hard_confidence;
  }
  return m;
}

std::vector<Triplet> triplets_from_embedding(const Matrix& z, std::size_t count, SeededRng& rng) {
  const std::size_t n = z.rows();
  if (n < 3) throw ArgumentError("triplet generation needs at least 3 instances");
  if (count == 0) throw ArgumentError("triplet count must be at least 1");
  std::vector<std::size_t> anchors(n);
  for (std::size_t i = 0; i < n; ++i) anchors[i] = i;
  rng.shuffle(std::span<std::size_t>(anchors));
  std::vector<Triplet> out;
  out.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    const std::size_t a = anchors[t % n];
    std::size_t j = rng.uniform_index(n - 1);
    if (j >= a) ++j;
    std::size_t l = rng.uniform_index(n - 2);
    // Skip a and j in index order.
    const std::size_t lo = std::min(a, j);
    const std::size_t hi = std::max(a, j);
    if (l >= lo) ++l;
    if (l >= hi) ++l;
    const double dj = squared_distance(z.row(a), z.row(j));
    const double dl = squared_distance(z.row(a), z.row(l));
    const bool j_closer = dj < dl || (dj == dl && j < l);
    out.push_back(j_closer ? Triplet{a, j, l} : Triplet{a, l, j});
  }
  return out;
}

bool ontology_triplet_admissible(const OntologyGraph& graph, const TripletGenConfig& config, int anchor_class,
                                 int positive_class, int negative_class) {
  const double sim_ap = ontology_similarity(graph, anchor_class, positive_class);
  const bool positive_ok = config.theta_p >= 1.0 ? sim_ap >= 1.0 : sim_ap > config.theta_p;
  return positive_ok && ontology_similarity(graph, anchor_class, negative_class) < config.theta_n &&
         ontology_similarity(graph, positive_class, negative_class) < config.theta_n;
}

std::vector<Triplet> triplets_from_ontology(std::span<const int> labels, std::span<const std::size_t> pool,
                                            const OntologyGraph& graph, const TripletGenConfig& config,
                                            SeededRng& rng) {
  config.validate();
  if (pool.size() < 3) throw ArgumentError("ontology triplets need a pool of at least 3 labeled instances");
  for (auto i : pool) {
    if (i >= labels.size()) throw ArgumentError("pool index " + std::to_string(i) + " has no label");
  }
  // Admissibility depends only on the class triple; cache it.
  std::map<std::tuple<int, int, int>, bool> cache;
  auto admissible = [&](int a, int p, int n) {
    const auto key = std::make_tuple(a, p, n);
    const auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const bool ok = ontology_triplet_admissible(graph, config, a, p, n);
    cache.emplace(key, ok);
    return ok;
  };

  std::vector<Triplet> out;
  out.reserve(config.count);
  std::size_t attempts = 0;
  while (out.size() < config.count) {
    if (attempts++ >= config.max_attempts) {
      std::ostringstream msg;
      msg << "only " << out.size() << " of " << config.count << " admissible triplets after " << config.max_attempts
          << " attempts (theta_p = " << config.theta_p << ", theta_n = " << config.theta_n << ")";
      throw ArgumentError(msg.str());
    }
    const std::size_t ia = rng.uniform_index(pool.size());
    const std::size_t ip = rng.uniform_index(pool.size());
    const std::size_t in = rng.uniform_index(pool.size());
    if (ia == ip || ia == in || ip == in) continue;
    const Triplet t{pool[ia], pool[ip], pool[in]};
    if (admissible(labels[t.anchor], labels[t.positive], labels[t.negative])) out.push_back(t);
  }
  return out;
}

ConstraintSet inject_noise(const ConstraintSet& clean, std::span<const int> labels, double degree, SeededRng& rng) {
  if (!(degree >= 0.0 && degree < 1.0)) throw ArgumentError("noise degree must lie in [0, 1)");
  const std::size_t n = labels.size();
  const std::size_t total = clean.must_links.size() + clean.cannot_links.size();
  const auto noisy = static_cast<std::size_t>(std::ceil(degree * static_cast<double>(total) - 1e-9));
  ConstraintSet out = clean;
  if (noisy == 0) return out;
  if (n < 2) throw ArgumentError("noise injection needs at least two instances");

  std::unordered_set<std::uint64_t> seen;
  for (const auto& p : clean.must_links) seen.insert(pair_key(p, n));
  for (const auto& p : clean.cannot_links) seen.insert(pair_key(p, n));
  const std::size_t distinct = n * (n - 1) / 2;
  if (seen.size() + noisy > distinct) throw ArgumentError("not enough fresh pairs for the requested noise");

  for (std::size_t added = 0; added < noisy;) {
    const auto p = random_pair(n, rng);
    if (!seen.insert(pair_key(p, n)).second) continue;
    (labels[p.a] == labels[p.b] ? out.cannot_links : out.must_links).push_back(p);
    ++added;
  }
  return out;
}

}  // namespace dcc
