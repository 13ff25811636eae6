#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "dcc/error.hpp"
#include "dcc/matrix.hpp"
#include "dcc/mlp.hpp"
#include "dcc/optim.hpp"
#include "dcc/rng.hpp"
#include "test_support.hpp"

using namespace dcc;

namespace {

MlpParams single_layer(double w, double b, Activation act = Activation::identity) {
  MlpParams p;
  p.layers.push_back(DenseLayer{Matrix{{w}}, {b}, act});
  return p;
}

std::vector<double> flatten(const std::vector<std::vector<double>>& blocks) {
  std::vector<double> out;
  for (const auto& b : blocks) out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::vector<double> flatten(const GradList& blocks) {
  std::vector<double> out;
  for (const auto& b : blocks) out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

TEST_CASE("matrix basics") {
  Matrix m{{1, 2, 3}, {4, 5, 6}};
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 2) == 6);
  const std::vector<std::size_t> pick{1, 0, 1};
  const Matrix g = gather_rows(m, pick);
  CHECK(g == Matrix{{4, 5, 6}, {1, 2, 3}, {4, 5, 6}});
  CHECK(squared_distance(m.row(0), m.row(1)) == 27.0);
  CHECK(dot(m.row(0), m.row(1)) == 32.0);
  CHECK(m.all_finite());
  m(0, 0) = std::nan("");
  CHECK_FALSE(m.all_finite());
}

TEST_CASE("seeded streams are reproducible and forks are independent") {
  SeededRng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    (void)c;
  }
  SeededRng d(42);
  const auto f1 = d.fork(1);
  const auto f2 = d.fork(1);
  SeededRng f1c = f1, f2c = f2;
  CHECK(f1c.next_u64() == f2c.next_u64());
  SeededRng e(42);
  CHECK(d.next_u64() == e.next_u64());  // forking does not advance the parent

  SeededRng u(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    CHECK(u.uniform_index(7) < 7);
  }
}

TEST_CASE("uniform_index is roughly uniform") {
  SeededRng rng(3);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) ++counts[rng.uniform_index(5)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 400);
}

TEST_CASE("shuffle is a permutation") {
  SeededRng rng(9);
  std::vector<int> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i;
  rng.shuffle(std::span<int>(v));
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) CHECK(sorted[i] == i);
  CHECK(v != sorted);
}

TEST_CASE("mlp_forward hand-evaluated fixtures") {
  CHECK(mlp_forward(single_layer(1, 0), Matrix{{3}}).output == Matrix{{3}});
  CHECK(mlp_forward(single_layer(-2, 1), Matrix{{3}}).output == Matrix{{-5}});

  MlpParams two;
  two.layers.push_back(DenseLayer{Matrix{{-1}}, {0}, Activation::relu});
  two.layers.push_back(DenseLayer{Matrix{{1}}, {0}, Activation::identity});
  CHECK(mlp_forward(two, Matrix{{2}}).output == Matrix{{0}});

  MlpParams wide;
  wide.layers.push_back(DenseLayer{Matrix{{1, 2}, {-1, 1}, {0.5, 0}}, {0, 1, -1}, Activation::relu});
  wide.layers.push_back(DenseLayer{Matrix{{1, 1, 1}}, {0.25}, Activation::identity});
  // hidden = relu([1+4, -1+2+1, 0.5-1]) = [5, 2, 0]; out = 7.25
  CHECK(mlp_forward(wide, Matrix{{1, 2}}).output == Matrix{{7.25}});
  CHECK(mlp_predict(wide, Matrix{{1, 2}}) == Matrix{{7.25}});
}

TEST_CASE("mlp_forward rejects a width mismatch naming the layer") {
  MlpParams p;
  p.layers.push_back(DenseLayer{Matrix(3, 2), AlignedBuffer(3), Activation::relu});
  p.layers.push_back(DenseLayer{Matrix(1, 4), AlignedBuffer(1), Activation::identity});
  try {
    mlp_forward(p, Matrix(1, 2));
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
  CHECK_THROWS_AS(mlp_forward(single_layer(1, 0), Matrix(1, 2)), DimensionError);
}

TEST_CASE("mlp_backward hand chain rule") {
  const auto p = single_layer(1, 0);
  const auto stack = mlp_forward(p, Matrix{{2}});
  const auto back = mlp_backward(p, stack, Matrix{{1}});
  CHECK(back.params.layers[0].weight == Matrix{{2}});
  CHECK(back.params.layers[0].bias == AlignedBuffer{1});
  CHECK(back.input == Matrix{{1}});

  const auto zero = mlp_backward(p, stack, Matrix{{0}});
  CHECK(zero.params.layers[0].weight == Matrix{{0}});
  CHECK(zero.params.layers[0].bias == AlignedBuffer{0});
}

TEST_CASE("mlp_backward rejects stale stacks and wrong gradient shapes") {
  SeededRng rng(1);
  const std::vector<std::size_t> w1{3, 4, 2}, w2{3, 5, 2};
  const auto a = MlpParams::glorot(w1, rng);
  const auto b = MlpParams::glorot(w2, rng);
  const auto stack = mlp_forward(a, test::random_matrix(2, 3, rng));
  CHECK_THROWS_AS(mlp_backward(b, stack, Matrix(2, 2)), ConsistencyError);
  CHECK_THROWS_AS(mlp_backward(a, stack, Matrix(3, 2)), DimensionError);
}

TEST_CASE("relu subgradient at zero is zero") {
  MlpParams p;
  p.layers.push_back(DenseLayer{Matrix{{1}}, {0}, Activation::relu});
  p.layers.push_back(DenseLayer{Matrix{{1}}, {0}, Activation::identity});
  const auto stack = mlp_forward(p, Matrix{{0}});
  const auto back = mlp_backward(p, stack, Matrix{{1}});
  CHECK(back.input == Matrix{{0}});
}

TEST_CASE("mlp gradients match central differences on random networks") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SeededRng rng(seed);
    const std::size_t depth = 1 + rng.uniform_index(3);
    std::vector<std::size_t> widths{1 + rng.uniform_index(16)};
    for (std::size_t l = 0; l < depth; ++l) widths.push_back(1 + rng.uniform_index(16));
    auto params = MlpParams::glorot(widths, rng);
    for (auto& layer : params.layers) {
      for (double& b : layer.bias) b = rng.uniform(-0.5, 0.5);
    }
    const Matrix x = test::random_matrix(1 + rng.uniform_index(8), widths.front(), rng);
    const Matrix weights = test::random_matrix(x.rows(), widths.back(), rng);

    auto loss = [&] {
      const auto out = mlp_forward(params, x).output;
      double s = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) s += 0.5 * out.values()[i] * out.values()[i] * weights.values()[i];
      return s;
    };
    const auto stack = mlp_forward(params, x);
    Matrix grad_out = stack.output;
    for (std::size_t i = 0; i < grad_out.size(); ++i) grad_out.values()[i] *= weights.values()[i];
    const auto back = mlp_backward(params, stack, grad_out);
    const auto numeric = finite_diff_grad(loss, parameter_spans(params));
    CHECK(test::max_rel_error(flatten(gradient_spans(back.params)), flatten(numeric)) < 1e-4);
  }
}

TEST_CASE("adam hand-evaluated steps") {
  std::vector<double> theta{0.5};
  ParamList params{std::span<double>(theta)};
  auto state = AdamState::for_params(params);
  std::vector<double> g{1.0};
  GradList grads{std::span<const double>(g)};
  adam_step(state, params, grads);
  CHECK(state.step == 1);
  CHECK(theta[0] == doctest::Approx(0.5 - 0.001).epsilon(1e-9));
  const double before = theta[0];
  adam_step(state, params, grads);
  CHECK(state.step == 2);
  CHECK(before - theta[0] == doctest::Approx(0.001).epsilon(1e-6));
}

TEST_CASE("adam with zero gradients and zero moments is the identity") {
  std::vector<double> theta{1.0, -2.0, 3.0};
  const auto copy = theta;
  ParamList params{std::span<double>(theta)};
  auto state = AdamState::for_params(params);
  std::vector<double> g(3, 0.0);
  adam_step(state, params, GradList{std::span<const double>(g)});
  CHECK(theta == copy);
}

TEST_CASE("adam refuses non-finite gradients without touching state") {
  std::vector<double> theta{1.0, 2.0};
  ParamList params{std::span<double>(theta)};
  auto state = AdamState::for_params(params);
  const auto saved = state;
  std::vector<double> g{1.0, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(adam_step(state, params, GradList{std::span<const double>(g)}), NumericError);
  CHECK(state == saved);
  CHECK(theta == std::vector<double>{1.0, 2.0});
}

TEST_CASE("finite differences") {
  const auto sq = finite_diff_grad([](std::span<const double> t) { return t[0] * t[0]; }, std::vector<double>{3.0});
  CHECK(sq[0] == doctest::Approx(6.0).epsilon(1e-6));
  const auto flat = finite_diff_grad([](std::span<const double>) { return 4.0; }, std::vector<double>{1.0, 2.0});
  CHECK(flat == std::vector<double>{0.0, 0.0});
  const auto kink = finite_diff_grad([](std::span<const double> t) { return std::abs(t[0]); }, std::vector<double>{0.0});
  CHECK(kink[0] == 0.0);
  CHECK_THROWS_AS(finite_diff_grad([](std::span<const double> t) { return 1.0 / t[0]; }, std::vector<double>{1e-5}),
                  NumericError);
}

TEST_CASE("finite differences restore the parameters") {
  std::vector<double> theta{0.25, -1.5};
  const auto copy = theta;
  finite_diff_grad([&] { return theta[0] * theta[1]; }, ParamList{std::span<double>(theta)});
  CHECK(theta == copy);
}
