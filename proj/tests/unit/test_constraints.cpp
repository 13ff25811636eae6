#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "dcc/constraint_gen.hpp"
#include "dcc/constraints.hpp"
#include "dcc/error.hpp"
#include "dcc/metrics.hpp"
#include "test_support.hpp"

using namespace dcc;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

Labels random_labels(std::size_t n, int classes, SeededRng& rng) {
  Labels l(n);
  for (int& v : l) v = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(classes)));
  return l;
}

// a - b - c - d - e chain, one class per node
OntologyGraph chain() {
  OntologyGraph g;
  const char* names[] = {"a", "b", "c", "d", "e"};
  for (int i = 0; i + 1 < 5; ++i) g.add_edge(names[i], names[i + 1]);
  for (int i = 0; i < 5; ++i) g.map_class(i, names[i]);
  return g;
}

bool labels_agree(const ConstraintSet& s, const Labels& l) {
  for (const auto& p : s.must_links) {
    if (l[p.a] != l[p.b]) return false;
  }
  for (const auto& p : s.cannot_links) {
    if (l[p.a] == l[p.b]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("constraint file round trip") {
  const auto dir = test::scratch_dir("constraints");
  ConstraintSet s;
  s.must_links = {{0, 1}, {2, 3}};
  s.cannot_links = {{0, 4}};
  s.triplets = {{0, 1, 4}};
  s.difficulty = std::vector<double>{1.0, -0.1, 0.0, 0.5, 0.0};
  s.cardinality = CardinalitySpec{{1, 0, 1, 0, 1}};
  s.horn_rules = {HornRule{{{0, 1}, {1, 2}}, {3, 4}}};
  write_constraints(dir / "c.txt", s);
  CHECK(read_constraints(dir / "c.txt", 5) == s);
}

TEST_CASE("constraint file parsing") {
  const auto dir = test::scratch_dir("constraints-parse");
  write_text(dir / "a.txt", "# comment\nML 0 1\n\nCL 1 2  # trailing\nTRI 0 1 2\nDIF 2 -0.1\nHORN 0 1 -> 1 2\n");
  const auto s = read_constraints(dir / "a.txt", 3);
  CHECK(s.must_links == std::vector<IndexPair>{{0, 1}});
  CHECK(s.cannot_links == std::vector<IndexPair>{{1, 2}});
  CHECK(s.triplets.size() == 1);
  CHECK(*s.difficulty == std::vector<double>{0.0, 0.0, -0.1});
  CHECK(s.horn_rules.size() == 1);

  write_text(dir / "b.txt", "ML 0 1\nXX 1 2\n");
  try {
    read_constraints(dir / "b.txt", 3);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  write_text(dir / "c.txt", "ML 0\n");
  CHECK_THROWS_AS(read_constraints(dir / "c.txt", 3), FormatError);
  write_text(dir / "d.txt", "ML 0 x\n");
  CHECK_THROWS_AS(read_constraints(dir / "d.txt", 3), FormatError);
}

TEST_CASE("constraint set validation") {
  ConstraintSet s;
  s.must_links = {{0, 9}};
  CHECK_THROWS_AS(s.validate(5), ArgumentError);
  s.must_links = {{1, 1}};
  CHECK_THROWS_AS(s.validate(5), ArgumentError);
  s.must_links = {{1, 2}};
  s.cannot_links = {{2, 1}};
  CHECK_THROWS_AS(s.validate(5), ConsistencyError);
  s.cannot_links.clear();
  s.difficulty = std::vector<double>{0, 0, 2.0, 0, 0};
  CHECK_THROWS_AS(s.validate(5), ArgumentError);
  s.difficulty.reset();
  s.validate(5);
  CHECK_FALSE(s.empty());
  CHECK(ConstraintSet{}.empty());
}

TEST_CASE("pairwise constraints from labels") {
  SeededRng rng(1);
  const Labels small{0, 0, 1};
  const auto all = pairwise_from_labels(small, 3, rng);
  CHECK(all.must_links == std::vector<IndexPair>{{0, 1}});
  CHECK(all.cannot_links.size() == 2);
  CHECK(std::count(all.cannot_links.begin(), all.cannot_links.end(), IndexPair{0, 2}) == 1);
  CHECK_THROWS_AS(pairwise_from_labels(small, 4, rng), ArgumentError);

  const auto labels = random_labels(500, 10, rng);
  const auto s = pairwise_from_labels(labels, 100, rng);
  CHECK(s.must_links.size() + s.cannot_links.size() == 100);
  CHECK(labels_agree(s, labels));
  std::set<IndexPair> distinct;
  for (const auto& p : s.must_links) distinct.insert(canonical(p));
  for (const auto& p : s.cannot_links) distinct.insert(canonical(p));
  CHECK(distinct.size() == 100);
}

TEST_CASE("transitive closure") {
  const std::vector<IndexPair> ml{{0, 1}, {1, 2}};
  const auto a = close_constraints(ml, {}, 4);
  CHECK(a.must_links == std::vector<IndexPair>{{0, 1}, {0, 2}, {1, 2}});

  const std::vector<IndexPair> ml2{{0, 1}};
  const std::vector<IndexPair> cl2{{1, 2}};
  const auto b = close_constraints(ml2, cl2, 3);
  CHECK(b.cannot_links == std::vector<IndexPair>{{0, 2}, {1, 2}});

  const std::vector<IndexPair> cl3{{0, 2}};
  CHECK_THROWS_AS(close_constraints(ml, cl3, 3), ConsistencyError);
}

TEST_CASE("closure of label-derived sets is idempotent and stays label-consistent") {
  SeededRng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto labels = random_labels(40, 4, rng);
    const auto s = pairwise_from_labels(labels, 60, rng);
    const auto once = close_constraints(s.must_links, s.cannot_links, 40);
    CHECK(once == close_constraints(once.must_links, once.cannot_links, 40));
    CHECK(once.must_links.size() >= s.must_links.size());
    CHECK(once.cannot_links.size() >= s.cannot_links.size());
    CHECK(labels_agree(once, labels));
  }
}

TEST_CASE("ontology similarity") {
  const auto g = chain();
  CHECK(ontology_similarity(g, 0, 0) == 1.0);
  CHECK(ontology_similarity(g, 0, 1) == 0.5);
  CHECK(ontology_similarity(g, 0, 4) == doctest::Approx(0.2));
  CHECK(ontology_similarity(g, 4, 0) == ontology_similarity(g, 0, 4));
  CHECK_THROWS_AS(ontology_similarity(g, 0, 7), GraphError);

  OntologyGraph split;
  split.add_edge("x", "y");
  split.add_node("z");
  split.map_class(0, "x");
  split.map_class(1, "z");
  CHECK_THROWS_AS(ontology_similarity(split, 0, 1), GraphError);
  CHECK_THROWS_AS(split.map_class(2, "missing"), GraphError);
}

TEST_CASE("ontology files") {
  const auto dir = test::scratch_dir("ontology");
  write_text(dir / "edges.txt", "# tree\nroot animal\nanimal cat\nanimal dog\nroot thing\n");
  write_text(dir / "classes.txt", "0 cat\n1 dog\n2 thing\n");
  const auto g = OntologyGraph::load(dir / "edges.txt", dir / "classes.txt");
  CHECK(ontology_similarity(g, 0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(ontology_similarity(g, 0, 2) == doctest::Approx(0.25));

  write_text(dir / "bad.txt", "root\n");
  try {
    OntologyGraph::load(dir / "bad.txt", dir / "classes.txt");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("bundled fashion ontology covers all classes") {
  const fs::path root = DCC_TEST_DATA_DIR;
  const auto g = OntologyGraph::load(root / "fashion_ontology.txt", root / "fashion_classmap.txt");
  CHECK(g.class_nodes().size() == 10);
  for (int a = 0; a < 10; ++a) {
    for (int b = 0; b < 10; ++b) CHECK(ontology_similarity(g, a, b) == ontology_similarity(g, b, a));
  }
}

TEST_CASE("triplet generation config") {
  TripletGenConfig c;
  c.validate();
  c.theta_n = 0.6;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = {};
  c.theta_p = 1.5;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = {};
  c.count = 0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("ontology triplets respect every threshold") {
  const auto g = chain();
  TripletGenConfig c;
  c.theta_p = 0.5;
  c.theta_n = 0.3;
  c.count = 200;
  // sim > 0.5 needs d = 0; sim < 0.3 needs d >= 3
  CHECK(ontology_triplet_admissible(g, c, 0, 0, 3));
  CHECK_FALSE(ontology_triplet_admissible(g, c, 0, 1, 4));
  CHECK_FALSE(ontology_triplet_admissible(g, c, 0, 0, 2));

  SeededRng rng(5);
  const auto labels = random_labels(100, 5, rng);
  std::vector<std::size_t> pool(100);
  std::iota(pool.begin(), pool.end(), 0);
  const auto t = triplets_from_ontology(labels, pool, g, c, rng);
  CHECK(t.size() == 200);
  for (const auto& x : t) {
    CHECK(labels[x.anchor] == labels[x.positive]);
    CHECK(ontology_triplet_admissible(g, c, labels[x.anchor], labels[x.positive], labels[x.negative]));
  }

  TripletGenConfig same;
  same.theta_p = 1.0;
  same.theta_n = 0.3;
  CHECK(ontology_triplet_admissible(g, same, 0, 0, 3));
  CHECK_FALSE(ontology_triplet_admissible(g, same, 2, 1, 4));
}

TEST_CASE("ontology triplet exhaustion names the thresholds") {
  OntologyGraph g;
  g.add_edge("a", "b");
  g.map_class(0, "a");
  g.map_class(1, "b");
  TripletGenConfig c;
  c.count = 5;
  c.max_attempts = 1000;
  const Labels labels{0, 0, 1, 1};
  const std::vector<std::size_t> pool{0, 1, 2, 3};
  SeededRng rng(1);
  try {
    triplets_from_ontology(labels, pool, g, c, rng);
    FAIL("expected exhaustion");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("theta_p = 0.5") != std::string::npos);
    CHECK(std::string(e.what()).find("theta_n = 0.3") != std::string::npos);
  }
}

TEST_CASE("embedding triplets") {
  const Matrix z{{0.0}, {1.0}, {10.0}};
  SeededRng rng(2);
  const auto t = triplets_from_embedding(z, 30, rng);
  CHECK(t.size() == 30);
  for (const auto& x : t) {
    if (x.anchor == 0) {
      CHECK(x.positive == 1);
      CHECK(x.negative == 2);
    }
    CHECK(std::abs(z(x.anchor, 0) - z(x.positive, 0)) <= std::abs(z(x.anchor, 0) - z(x.negative, 0)));
  }

  const Matrix tie{{0.0}, {-1.0}, {1.0}};
  for (const auto& x : triplets_from_embedding(tie, 20, rng)) {
    if (x.anchor == 0) CHECK(x.positive == 1);
  }
  CHECK_THROWS_AS(triplets_from_embedding(Matrix(2, 1), 1, rng), ArgumentError);

  const Matrix big = test::random_matrix(50, 3, rng);
  for (const auto& x : triplets_from_embedding(big, 200, rng)) {
    CHECK(x.anchor != x.positive);
    CHECK(x.positive != x.negative);
    CHECK(squared_distance(big.row(x.anchor), big.row(x.positive)) <=
          squared_distance(big.row(x.anchor), big.row(x.negative)));
  }
}

TEST_CASE("noise injection") {
  SeededRng rng(6);
  const auto labels = random_labels(2000, 10, rng);
  const auto clean = pairwise_from_labels(labels, 6000, rng);
  CHECK(inject_noise(clean, labels, 0.0, rng) == clean);

  const auto noisy = inject_noise(clean, labels, 0.05, rng);
  CHECK(noisy.must_links.size() + noisy.cannot_links.size() == 6300);
  std::size_t flipped = 0;
  for (const auto& p : noisy.must_links) flipped += labels[p.a] != labels[p.b];
  for (const auto& p : noisy.cannot_links) flipped += labels[p.a] == labels[p.b];
  CHECK(flipped == 300);
  noisy.validate(2000);
  CHECK_THROWS_AS(inject_noise(clean, labels, 1.0, rng), ArgumentError);
}

TEST_CASE("difficulty from a weak learner") {
  Dataset ds;
  ds.features = Matrix{{0.0, 0.0}, {0.1, 0.0}, {0.0, 0.1}, {10.0, 10.0}, {10.1, 10.0}, {10.0, 10.1}};
  ds.labels = Labels{0, 0, 0, 1, 1, 1};
  SeededRng rng(1);
  CHECK(difficulty_from_weak_learner(ds, 2, rng) == std::vector<double>(6, 1.0));

  ds.labels = Labels{0, 0, 1, 1, 1, 1};
  const auto m = difficulty_from_weak_learner(ds, 2, rng);
  CHECK(m[2] == -0.1);
  for (double v : m) CHECK((v == 1.0 || v == -0.1));
  CHECK_THROWS_AS(difficulty_from_weak_learner(ds, 3, rng), ArgumentError);
}
