#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "slfc/core/matrix.hpp"
#include "slfc/core/rng.hpp"
#include "slfc/core/tape.hpp"
#include "support/gradcheck.hpp"

using namespace slfc;
using slfc::test::gradcheck;

namespace {

Matrix positive_random(Rng& rng, std::size_t r, std::size_t c, double lo = 0.2) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = lo + std::abs(rng.normal());
  return m;
}

}  // namespace

TEST_CASE("square gradient at a point") {
  Tape t;
  Tape::NodeId x = t.leaf(Matrix{{3.0}});
  Tape::NodeId loss = t.sum_all(t.square(x));
  auto adj = t.backward(loss);
  CHECK(adj[x](0, 0) == Catch::Approx(6.0).margin(1e-12));
}

TEST_CASE("quadratic form ||Wz + b||^2 matches finite differences") {
  Rng rng(3);
  Matrix w = rng.normal_matrix(3, 2);
  Matrix b = rng.normal_matrix(1, 3);
  Matrix z = rng.normal_matrix(1, 2);
  double worst = gradcheck({w, b}, [&](Tape& t, const std::vector<Tape::NodeId>& ids) {
    Tape::NodeId zc = t.constant(z);
    Tape::NodeId u = t.add_row(t.matmul_nt(zc, ids[0]), ids[1]);
    return t.sum_all(t.square(u));
  });
  CHECK(worst < 1e-6);
}

TEST_CASE("every primitive matches finite differences") {
  Rng rng(17);
  const std::size_t m = 3, n = 4;
  Matrix a = rng.normal_matrix(m, n);
  Matrix b = rng.normal_matrix(m, n);
  Matrix pos = positive_random(rng, m, n);
  Matrix row = rng.normal_matrix(1, n);
  Matrix posrow = positive_random(rng, 1, n);
  Matrix col = rng.normal_matrix(m, 1);

  auto check1 = [&](const char* name, Matrix in,
                    std::function<Tape::NodeId(Tape&, Tape::NodeId)> op) {
    INFO(name);
    double worst = gradcheck({std::move(in)},
                             [&](Tape& t, const std::vector<Tape::NodeId>& ids) {
                               return t.sum_all(op(t, ids[0]));
                             });
    CHECK(worst < 1e-4);
  };
  auto check2 = [&](const char* name, Matrix in0, Matrix in1,
                    std::function<Tape::NodeId(Tape&, Tape::NodeId, Tape::NodeId)> op) {
    INFO(name);
    double worst = gradcheck({std::move(in0), std::move(in1)},
                             [&](Tape& t, const std::vector<Tape::NodeId>& ids) {
                               return t.sum_all(op(t, ids[0], ids[1]));
                             });
    CHECK(worst < 1e-4);
  };

  check2("add", a, b, [](Tape& t, auto x, auto y) { return t.add(x, y); });
  check2("sub", a, b, [](Tape& t, auto x, auto y) { return t.sub(x, y); });
  check2("mul", a, b, [](Tape& t, auto x, auto y) { return t.mul(x, y); });
  check2("div", a, pos, [](Tape& t, auto x, auto y) { return t.div(x, y); });
  check2("add_row", a, row, [](Tape& t, auto x, auto r) { return t.add_row(x, r); });
  check2("sub_row", a, row, [](Tape& t, auto x, auto r) { return t.sub_row(x, r); });
  check2("rsub_row", a, row, [](Tape& t, auto x, auto r) { return t.rsub_row(x, r); });
  check2("mul_row", a, row, [](Tape& t, auto x, auto r) { return t.mul_row(x, r); });
  check2("div_row", a, posrow, [](Tape& t, auto x, auto r) { return t.div_row(x, r); });
  check2("sub_col", a, col, [](Tape& t, auto x, auto c) { return t.sub_col(x, c); });
  check2("mul_col", a, col, [](Tape& t, auto x, auto c) { return t.mul_col(x, c); });
  check1("scale", a, [](Tape& t, auto x) { return t.scale(x, -1.7); });
  check1("add_scalar", a, [](Tape& t, auto x) { return t.add_scalar(x, 2.5); });
  check1("neg", a, [](Tape& t, auto x) { return t.neg(x); });
  check1("tanh", a, [](Tape& t, auto x) { return t.tanh(x); });
  check1("softplus", a, [](Tape& t, auto x) { return t.softplus(x); });
  check1("exp", a, [](Tape& t, auto x) { return t.exp(x); });
  check1("log", pos, [](Tape& t, auto x) { return t.log(x); });
  check1("sqrt", pos, [](Tape& t, auto x) { return t.sqrt(x); });
  check1("square", a, [](Tape& t, auto x) { return t.square(x); });
  check2("matmul", rng.normal_matrix(3, 2), rng.normal_matrix(2, 4),
         [](Tape& t, auto x, auto y) { return t.matmul(x, y); });
  check2("matmul_nt", rng.normal_matrix(3, 2), rng.normal_matrix(4, 2),
         [](Tape& t, auto x, auto y) { return t.matmul_nt(x, y); });
  check1("slice_cols", a, [](Tape& t, auto x) { return t.slice_cols(x, 1, 3); });
  check1("slice_rows", a, [](Tape& t, auto x) { return t.slice_rows(x, 0, 2); });
  check1("row_sum", a, [](Tape& t, auto x) { return t.row_sum(x); });
  check1("mean_all", a, [](Tape& t, auto x) { return t.mean_all(x); });
  check1("row_logsumexp", a, [](Tape& t, auto x) { return t.row_logsumexp(x); });

  {
    INFO("concat_cols");
    double worst = gradcheck({rng.normal_matrix(m, 2), rng.normal_matrix(m, 3)},
                             [&](Tape& t, const std::vector<Tape::NodeId>& ids) {
                               return t.sum_all(
                                   t.square(t.concat_cols({ids[0], ids[1]})));
                             });
    CHECK(worst < 1e-4);
  }
  {
    INFO("gauss_row_logpdf");
    Matrix x = rng.normal_matrix(m, n);
    double worst = gradcheck({a, pos}, [&](Tape& t, const std::vector<Tape::NodeId>& ids) {
      return t.sum_all(t.gauss_row_logpdf(x, ids[0], ids[1]));
    });
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("composed loss: logsumexp mixture of affine maps") {
  Rng rng(23);
  Matrix w1 = rng.normal_matrix(3, 2), w2 = rng.normal_matrix(3, 2);
  Matrix x = rng.normal_matrix(5, 2);
  double worst = gradcheck({w1, w2}, [&](Tape& t, const std::vector<Tape::NodeId>& ids) {
    Tape::NodeId xc = t.constant(x);
    Tape::NodeId h1 = t.tanh(t.matmul_nt(xc, ids[0]));
    Tape::NodeId h2 = t.tanh(t.matmul_nt(xc, ids[1]));
    Tape::NodeId joint = t.concat_cols({t.row_sum(h1), t.row_sum(h2)});
    return t.mean_all(t.row_logsumexp(joint));
  });
  CHECK(worst < 1e-4);
}

TEST_CASE("backward contract") {
  Tape t;
  Tape::NodeId x = t.leaf(Matrix{{1.0, 2.0}});
  Tape::NodeId y = t.square(x);
  CHECK_THROWS_AS(t.backward(y), ContractError);  // non-scalar loss

  // leaves not reached by the loss get zero gradients
  Tape::NodeId unused = t.leaf(Matrix{{5.0}});
  Tape::NodeId loss = t.sum_all(y);
  auto adj = t.backward(loss);
  CHECK(adj[unused](0, 0) == 0.0);
}

TEST_CASE("tape forward values are eager and shape-checked") {
  Tape t;
  Tape::NodeId a = t.constant(Matrix{{1.0, 2.0}, {3.0, 4.0}});
  Tape::NodeId b = t.constant(Matrix{{1.0, 1.0}});
  CHECK(t.value(t.add_row(a, b))(1, 0) == 4.0);
  CHECK_THROWS_AS(t.add(a, b), ShapeError);
  CHECK_THROWS_AS(t.slice_cols(a, 1, 5), ShapeError);
}
