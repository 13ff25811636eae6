#include <doctest.h>

#include <cmath>

#include "dcc/error.hpp"
#include "dcc/metrics.hpp"
#include "test_support.hpp"

using namespace dcc;

TEST_CASE("contingency table") {
  const auto t = ContingencyTable::build(std::vector<int>{5, 5, 9, 9}, std::vector<int>{2, 7, 7, 7});
  CHECK(t.classes() == 2);
  CHECK(t.clusters() == 2);
  CHECK(t.total == 4);
  CHECK(t.counts == std::vector<std::vector<std::size_t>>{{1, 1}, {0, 2}});
}

TEST_CASE("hungarian fixtures") {
  const auto a = hungarian(Matrix{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}});
  CHECK(a.cost == 5.0);
  CHECK(a.column_for_row == std::vector<std::size_t>{1, 0, 2});
  const auto rect = hungarian(Matrix{{1, 9}, {9, 1}, {5, 5}});
  CHECK(rect.cost == 2.0);
  CHECK_THROWS_AS(hungarian(Matrix{{std::nan(""), 1.0}}), ArgumentError);
}

TEST_CASE("hungarian agrees with brute force") {
  SeededRng rng(99);
  for (int t = 0; t < 200; ++t) {
    const std::size_t r = 1 + rng.uniform_index(6), c = 1 + rng.uniform_index(6);
    const Matrix cost = test::random_matrix(r, c, rng, -10.0, 10.0);
    const auto a = hungarian(cost);
    CHECK(a.cost == doctest::Approx(checks::brute_force_min_cost(cost)));
    CHECK(checks::assignment_cost(cost, a) == doctest::Approx(a.cost));
  }
}

TEST_CASE("accuracy fixtures") {
  const std::vector<int> l{0, 0, 1, 1};
  CHECK(accuracy(l, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(accuracy(l, std::vector<int>{0, 1, 1, 1}) == 0.75);
  CHECK(accuracy(l, std::vector<int>{0, 0, 0, 0}) == 0.5);
  CHECK(accuracy(std::vector<int>{0, 1, 2}, std::vector<int>{4, 4, 4}) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(accuracy(l, std::vector<int>{0, 1}), ArgumentError);
}

TEST_CASE("nmi fixtures") {
  const std::vector<int> l{0, 0, 1, 1};
  CHECK(nmi(l, l) == doctest::Approx(1.0));
  CHECK(std::abs(nmi(l, std::vector<int>{0, 1, 0, 1})) < 1e-15);
  CHECK(nmi(l, std::vector<int>{1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(nmi(std::vector<int>{3, 3}, std::vector<int>{1, 1}) == 1.0);
  CHECK(nmi(std::vector<int>{0, 1}, std::vector<int>{0, 0}) == 0.0);
  CHECK_THROWS_AS(nmi(l, std::vector<int>{}), ArgumentError);
}

TEST_CASE("metric properties on random labelings") {
  SeededRng rng(7);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng.uniform_index(60);
    std::vector<int> a(n), b(n), perm{3, 0, 4, 1, 2};
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.uniform_index(5));
      b[i] = static_cast<int>(rng.uniform_index(5));
    }
    std::vector<int> relabeled(n);
    for (std::size_t i = 0; i < n; ++i) relabeled[i] = perm[static_cast<std::size_t>(b[i])];
    const double acc = accuracy(a, b), mi = nmi(a, b);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK(mi >= -1e-12);
    CHECK(mi <= 1.0 + 1e-12);
    CHECK(accuracy(a, relabeled) == acc);
    CHECK(nmi(a, relabeled) == doctest::Approx(mi));
    CHECK(nmi(b, a) == doctest::Approx(mi));
  }
}

TEST_CASE("matched predictions") {
  const std::vector<int> l{0, 0, 1, 1, 2};
  CHECK(matched_predictions(l, std::vector<int>{1, 1, 0, 0, 0}) == std::vector<int>{0, 0, 1, 1, 1});
  const auto partial = matched_predictions(std::vector<int>{0, 0}, std::vector<int>{0, 1});
  CHECK(std::count(partial.begin(), partial.end(), -1) == 1);
}

TEST_CASE("negative ratio") {
  const std::vector<PairedRun> runs{{0.9, 0.8}, {0.7, 0.8}, {0.8, 0.8}, {0.95, 0.8}};
  CHECK(negative_ratio(runs) == 0.25);
  CHECK_THROWS_AS(negative_ratio(std::vector<PairedRun>{}), ArgumentError);
}
