// Autodiff core: every differentiable op is checked against a central
// finite-difference oracle (h = 1e-5, double precision), plus hand-computed
// point values and structural graph contracts.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "starseq/tensor.hpp"

using namespace starseq;

namespace {

// Relative error with a unit floor in the denominator, so near-zero gradient
// pairs are compared absolutely at the same tolerance.
double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

Matrix randm(Index r, Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) {
      double u = static_cast<double>(rng()) / static_cast<double>(UINT64_MAX);
      m(i, j) = lo + (hi - lo) * u;
    }
  return m;
}

// Verifies analytic gradients of a scalar expression against central finite
// differences for every entry of every parameter.
void check_grads(const std::function<Var(Graph&)>& build,
                 const std::vector<Tensor*>& params, double tol,
                 double h = 1e-5) {
  for (auto* p : params) {
    p->requires_grad = true;
    p->grad.resize(0, 0);
  }
  {
    Graph g;
    Var loss = build(g);
    REQUIRE(loss.rows() == 1);
    REQUIRE(loss.cols() == 1);
    g.backward(loss);
  }
  auto eval = [&] {
    Graph g;
    return build(g).value()(0, 0);
  };
  for (auto* p : params) {
    Matrix analytic =
        p->grad.size() != 0 ? p->grad : Matrix::Zero(p->rows(), p->cols());
    for (Index i = 0; i < p->rows(); ++i) {
      for (Index j = 0; j < p->cols(); ++j) {
        double saved = p->value(i, j);
        p->value(i, j) = saved + h;
        double fp = eval();
        p->value(i, j) = saved - h;
        double fm = eval();
        p->value(i, j) = saved;
        double numeric = (fp - fm) / (2 * h);
        INFO("entry (" << i << "," << j << "): analytic " << analytic(i, j)
                       << " vs numeric " << numeric);
        CHECK(rel_err(analytic(i, j), numeric) < tol);
      }
    }
  }
}

}  // namespace

TEST_CASE("matmul forward: identity and hand arithmetic") {
  Graph g;
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  Var va = g.constant(a);
  Var id = g.constant(Matrix::Identity(2, 2));
  Var out = matmul(id, va);
  CHECK(out.value() == a);

  Matrix r(1, 2), c(2, 1);
  r << 1, 2;
  c << 3, 4;
  Var prod = matmul(g.constant(r), g.constant(c));
  CHECK(prod.rows() == 1);
  CHECK(prod.cols() == 1);
  CHECK(prod.value()(0, 0) == doctest::Approx(11.0).epsilon(1e-15));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  Graph g;
  Var a = g.constant(Matrix::Zero(2, 3));
  Var b = g.constant(Matrix::Zero(2, 3));
  CHECK_THROWS_AS(matmul(a, b), DimensionError);
}

TEST_CASE("matmul gradients match finite differences (3x4 by 4x2)") {
  auto rng = make_rng(1, "test-matmul");
  Tensor a(randm(3, 4, rng));
  Tensor b(randm(4, 2, rng));
  Matrix weight = randm(3, 2, rng);
  check_grads(
      [&](Graph& g) {
        Var out = matmul(g.leaf(a), g.leaf(b));
        return sum(mul(out, g.constant(weight)));
      },
      {&a, &b}, 1e-6);
}

TEST_CASE("matmul associativity: (AB)C == A(BC) within 1e-9") {
  auto rng = make_rng(2, "test-assoc");
  Matrix A = randm(3, 4, rng), B = randm(4, 5, rng), C = randm(5, 2, rng);
  Graph g;
  Var left = matmul(matmul(g.constant(A), g.constant(B)), g.constant(C));
  Var right = matmul(g.constant(A), matmul(g.constant(B), g.constant(C)));
  CHECK((left.value() - right.value()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("softmax_row: uniform logits, stability, and normalization") {
  Graph g;
  Matrix z(1, 4);
  z.setZero();
  Var s = softmax_row(g.constant(z));
  for (Index j = 0; j < 4; ++j) CHECK(s.value()(0, j) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(std::abs(s.value().sum() - 1.0) < 1e-12);

  Matrix big(1, 2);
  big << 1000.0, 0.0;
  Var sb = softmax_row(g.constant(big));
  CHECK(std::abs(sb.value()(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(sb.value()(0, 1) - 0.0) < 1e-12);
}

TEST_CASE("softmax_row is invariant to adding a constant to all logits") {
  auto rng = make_rng(3, "test-softmax-shift");
  Matrix z = randm(1, 6, rng, -2, 2);
  Graph g;
  Var s1 = softmax_row(g.constant(z));
  Var s2 = softmax_row(g.constant(Matrix(z.array() + 7.5)));
  CHECK((s1.value() - s2.value()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("softmax_row rejects an empty row") {
  Graph g;
  Var bad = g.constant(Matrix::Zero(1, 0));
  CHECK_THROWS_AS(softmax_row(bad), DimensionError);
  CHECK_THROWS_AS(softmax_row(g.constant(Matrix::Zero(2, 3))), DimensionError);
}

TEST_CASE("gradient of softmax over a dot product matches finite differences") {
  auto rng = make_rng(4, "test-softmax-grad");
  Tensor q(randm(1, 3, rng));
  Tensor K(randm(3, 5, rng));
  Matrix pick = randm(1, 5, rng);
  check_grads(
      [&](Graph& g) {
        Var logits = matmul(g.leaf(q), g.leaf(K));
        return sum(mul(softmax_row(logits), g.constant(pick)));
      },
      {&q, &K}, 1e-6);
}

TEST_CASE("masked softmax zeroes masked columns and keeps gradient exact") {
  auto rng = make_rng(5, "test-masked-softmax");
  Tensor x(randm(2, 4, rng));
  std::vector<std::vector<bool>> keep = {{true, false, true, true},
                                         {false, true, false, true}};
  {
    Graph g;
    Var y = masked_softmax_rows(g.leaf(x), keep);
    CHECK(y.value()(0, 1) == 0.0);
    CHECK(y.value()(1, 0) == 0.0);
    CHECK(y.value()(1, 2) == 0.0);
    for (Index r = 0; r < 2; ++r)
      CHECK(std::abs(y.value().row(r).sum() - 1.0) < 1e-12);
  }
  Matrix pick = randm(2, 4, rng);
  check_grads(
      [&](Graph& g) {
        return sum(mul(masked_softmax_rows(g.leaf(x), keep), g.constant(pick)));
      },
      {&x}, 1e-6);
}

TEST_CASE("masked softmax: fully masked row policy") {
  Graph g;
  Var x = g.constant(Matrix::Zero(1, 3));
  std::vector<std::vector<bool>> none = {{false, false, false}};
  CHECK_THROWS_AS(masked_softmax_rows(x, none), ContractError);
  Var y = masked_softmax_rows(x, none, /*allow_empty_rows=*/true);
  CHECK(y.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("relu and gelu point values") {
  Graph g;
  Matrix x(1, 3);
  x << -1.0, 0.0, 2.0;
  Var r = activation(g.constant(x), Activation::Relu);
  CHECK(r.value()(0, 0) == 0.0);
  CHECK(r.value()(0, 1) == 0.0);
  CHECK(r.value()(0, 2) == 2.0);
  Var ge = activation(g.constant(x), Activation::Gelu);
  CHECK(ge.value()(0, 1) == 0.0);  // odd point of the definition
}

TEST_CASE("gelu gradient matches finite differences at fixed probe points") {
  for (double v : {-2.0, -0.5, 0.5, 2.0}) {
    Tensor x(Matrix::Constant(1, 1, v));
    check_grads([&](Graph& g) { return sum(activation(g.leaf(x), Activation::Gelu)); },
                {&x}, 1e-5);
  }
}

TEST_CASE("relu gradient matches finite differences away from the kink") {
  auto rng = make_rng(6, "test-relu");
  Matrix vals = randm(2, 3, rng, 0.2, 1.5);
  vals(1, 1) = -0.7;
  vals(0, 2) = -1.2;
  Tensor x(vals);
  check_grads([&](Graph& g) { return sum(activation(g.leaf(x), Activation::Relu)); },
              {&x}, 1e-6);
}

TEST_CASE("sigmoid(0) = 0.5 with gradient 0.25") {
  Tensor x(Matrix::Zero(1, 1), true);
  Graph g;
  Var s = sigmoid(g.leaf(x));
  CHECK(s.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  g.backward(s);
  CHECK(x.grad(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("log rejects nonpositive input and differentiates cleanly") {
  Graph g;
  Matrix bad(1, 2);
  bad << 1.0, 0.0;
  CHECK_THROWS_AS(log(g.constant(bad)), DomainError);
  CHECK_THROWS_AS(log(g.constant(Matrix::Constant(1, 1, -3.0))), DomainError);

  auto rng = make_rng(7, "test-log");
  Tensor x(randm(2, 2, rng, 0.3, 2.0));
  check_grads([&](Graph& g2) { return sum(log(g2.leaf(x))); }, {&x}, 1e-6);
}

TEST_CASE("softplus matches log1p(exp) and saturates without overflow") {
  Graph g;
  Matrix x(1, 3);
  x << 0.0, 50.0, -50.0;
  Var y = softplus(g.constant(x));
  CHECK(y.value()(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(y.value()(0, 1) == doctest::Approx(50.0).epsilon(1e-14));
  CHECK(y.value()(0, 2) < 1e-20);

  auto rng = make_rng(8, "test-softplus");
  Tensor t(randm(1, 4, rng, -3, 3));
  check_grads([&](Graph& g2) { return sum(softplus(g2.leaf(t))); }, {&t}, 1e-6);
}

TEST_CASE("sum(w) backward yields all-ones; sum(w.w) yields 2w") {
  Tensor w(Matrix::Zero(2, 2), true);
  w.value << 1, 2, 3, 4;
  {
    Graph g;
    Var loss = sum(g.leaf(w));
    g.backward(loss);
    CHECK(w.grad == Matrix::Ones(2, 2));
  }
  w.grad.resize(0, 0);
  {
    Graph g;
    Var lw = g.leaf(w);
    Var loss = sum(mul(lw, lw));
    g.backward(loss);
    Matrix expect(2, 2);
    expect << 2, 4, 6, 8;
    CHECK((w.grad - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("backward contracts: scalar-only, graph identity, additivity") {
  Tensor w(Matrix::Ones(2, 2), true);
  Graph g;
  Var lw = g.leaf(w);
  CHECK_THROWS_AS(g.backward(lw), ContractError);  // non-scalar loss

  Var loss = sum(lw);
  Graph other;
  CHECK_THROWS_AS(other.backward(loss), ContractError);

  g.backward(loss);
  g.backward(loss);  // repeated backward adds another full gradient
  CHECK(w.grad == Matrix::Constant(2, 2, 2.0));
}

TEST_CASE("sum-of-product gradients match finite differences") {
  auto rng = make_rng(9, "test-summul");
  Tensor a(randm(3, 3, rng));
  Tensor b(randm(3, 3, rng));
  check_grads([&](Graph& g) { return sum(mul(g.leaf(a), g.leaf(b))); }, {&a, &b},
              1e-6);
}

TEST_CASE("row-broadcast elementwise ops and their reduced gradients") {
  auto rng = make_rng(10, "test-broadcast");
  Tensor m(randm(4, 3, rng));
  Tensor r(randm(1, 3, rng));
  Matrix w = randm(4, 3, rng);
  for (ElemOp op : {ElemOp::Add, ElemOp::Sub, ElemOp::Mul}) {
    check_grads(
        [&](Graph& g) {
          return sum(mul(elementwise(g.leaf(m), g.leaf(r), op), g.constant(w)));
        },
        {&m, &r}, 1e-6);
    check_grads(
        [&](Graph& g) {
          return sum(mul(elementwise(g.leaf(r), g.leaf(m), op), g.constant(w)));
        },
        {&m, &r}, 1e-6);
  }
  Graph g;
  CHECK_THROWS_AS(add(g.constant(Matrix::Zero(2, 3)), g.constant(Matrix::Zero(3, 2))),
                  DimensionError);
}

TEST_CASE("concat_rows preserves order and routes gradients to each part") {
  Graph g;
  Matrix a(1, 3), b(1, 3);
  a << 1, 2, 3;
  b << 4, 5, 6;
  Var cat = concat_rows<Real>({g.constant(a), g.constant(b)});
  REQUIRE(cat.rows() == 1);
  REQUIRE(cat.cols() == 6);
  for (Index j = 0; j < 6; ++j) CHECK(cat.value()(0, j) == doctest::Approx(j + 1.0));

  auto rng = make_rng(11, "test-concat");
  Tensor p(randm(2, 2, rng)), q(randm(2, 3, rng));
  Matrix w = randm(2, 5, rng);
  check_grads(
      [&](Graph& g2) {
        return sum(mul(concat_rows<Real>({g2.leaf(p), g2.leaf(q)}), g2.constant(w)));
      },
      {&p, &q}, 1e-6);
}

TEST_CASE("rows gather scatters gradients back, repeats accumulate") {
  Tensor table(Matrix::Zero(4, 2), true);
  table.value << 1, 2, 3, 4, 5, 6, 7, 8;
  Graph g;
  Var picked = rows(g.leaf(table), {2, 0, 2});
  CHECK(picked.value()(0, 0) == 5.0);
  CHECK(picked.value()(1, 0) == 1.0);
  g.backward(sum(picked));
  Matrix expect = Matrix::Zero(4, 2);
  expect.row(0).setOnes();
  expect.row(2).setConstant(2.0);  // gathered twice
  CHECK(table.grad == expect);

  CHECK_THROWS_AS(rows(g.leaf(table), {4}), IndexError);
  CHECK_THROWS_AS(rows(g.leaf(table), {-1}), IndexError);
}

TEST_CASE("mask_rows zeroes values and gradients of masked rows") {
  auto rng = make_rng(12, "test-mask");
  Tensor x(randm(3, 2, rng));
  std::vector<bool> keep = {true, false, true};
  {
    Graph g;
    Var y = mask_rows(g.leaf(x), keep);
    CHECK(y.value().row(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(y.value().row(0) == x.value.row(0));
  }
  check_grads([&](Graph& g) { return sum(mask_rows(g.leaf(x), keep)); }, {&x}, 1e-6);
  x.requires_grad = true;
  x.grad.resize(0, 0);
  Graph g;
  g.backward(sum(mask_rows(g.leaf(x), keep)));
  CHECK(x.grad.row(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("transpose and scale differentiate correctly") {
  auto rng = make_rng(13, "test-transpose");
  Tensor x(randm(2, 3, rng));
  Matrix w = randm(3, 2, rng);
  check_grads(
      [&](Graph& g) { return sum(mul(transpose(g.leaf(x)), g.constant(w))); },
      {&x}, 1e-6);
  check_grads([&](Graph& g) { return sum(scale(g.leaf(x), Real(-2.5))); }, {&x},
              1e-6);
}

TEST_CASE("non-finite op results raise a numerical error") {
  Graph g;
  Var x = g.constant(Matrix::Constant(1, 1, 1e308));
  CHECK_THROWS_AS(scale(x, Real(10.0)), NumericalError);
}

TEST_CASE("graph replay determinism: identical inputs give bitwise-equal values") {
  auto rng = make_rng(14, "test-replay");
  Matrix a = randm(3, 3, rng), b = randm(3, 3, rng);
  auto run = [&] {
    Graph g;
    Var out = matmul(sigmoid(g.constant(a)), activation(g.constant(b), Activation::Gelu));
    return Matrix(softmax_row(row(out, 1)).value());
  };
  Matrix first = run(), second = run();
  CHECK(first == second);  // bitwise
}

TEST_CASE("randomized gradient property: 100 trials across all op kinds") {
  for (int trial = 0; trial < 100; ++trial) {
    auto rng = make_rng(static_cast<std::uint64_t>(trial), "test-property");
    Index r = 1 + static_cast<Index>(uniform_index(rng, 3));
    Index c = 1 + static_cast<Index>(uniform_index(rng, 3));
    Tensor a(randm(r, c, rng));
    Tensor b(randm(r, c, rng));
    Matrix w = randm(r, c, rng);
    Matrix w_square = randm(r, r, rng);
    Matrix w_row = randm(1, r, rng);
    std::function<Var(Graph&)> build;
    switch (trial % 10) {
      case 0:
        build = [&](Graph& g) {
          return sum(mul(matmul(g.leaf(a), transpose(g.leaf(b))),
                         g.constant(w_square)));
        };
        break;
      case 1:
        build = [&](Graph& g) {
          return sum(mul(add(g.leaf(a), g.leaf(b)), g.constant(w)));
        };
        break;
      case 2:
        build = [&](Graph& g) {
          return sum(mul(sub(g.leaf(a), g.leaf(b)), g.constant(w)));
        };
        break;
      case 3:
        build = [&](Graph& g) {
          return sum(mul(sigmoid(g.leaf(a)), g.constant(w)));
        };
        break;
      case 4:
        a.value = randm(r, c, rng, 0.2, 2.0);
        build = [&](Graph& g) { return sum(mul(log(g.leaf(a)), g.constant(w))); };
        break;
      case 5:
        build = [&](Graph& g) {
          return sum(mul(softplus(g.leaf(a)), g.constant(w)));
        };
        break;
      case 6:
        build = [&](Graph& g) {
          return sum(mul(activation(g.leaf(a), Activation::Gelu), g.constant(w)));
        };
        break;
      case 7:
        build = [&](Graph& g) {
          Var sm = softmax_row(row(matmul(g.leaf(a), transpose(g.leaf(b))), 0));
          return sum(mul(sm, g.constant(w_row)));
        };
        break;
      case 8:
        build = [&](Graph& g) {
          return sum(mul(mul(g.leaf(a), g.leaf(b)), g.constant(w)));
        };
        break;
      default:
        build = [&](Graph& g) {
          return sum(mul(scale(add(g.leaf(a), g.leaf(b)), Real(1.7)), g.constant(w)));
        };
        break;
    }
    check_grads(build, {&a, &b}, 1e-4);
  }
}
