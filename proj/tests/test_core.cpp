#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <limits>

#include "slfc/core/distributions.hpp"
#include "slfc/core/linalg.hpp"
#include "slfc/core/matrix.hpp"
#include "slfc/core/rng.hpp"

using namespace slfc;

namespace {

DiagGaussian unit_normal(std::size_t n) { return DiagGaussian(Vector(n, 0.0), Vector(n, 1.0)); }

double det3(const Matrix& m) {
  // cofactor expansion, independent of the eigvals path
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

}  // namespace

TEST_CASE("mvn_logpdf_diag matches hand evaluations") {
  CHECK(mvn_logpdf_diag({0.0}, unit_normal(1)) == Catch::Approx(-0.9189385).margin(1e-7));
  CHECK(mvn_logpdf_diag({1.0}, unit_normal(1)) == Catch::Approx(-1.4189385).margin(1e-7));
  CHECK(mvn_logpdf_diag({0.0, 0.0}, unit_normal(2)) ==
        Catch::Approx(-1.8378771).margin(1e-7));
  CHECK_THROWS_AS(mvn_logpdf_diag({0.0, 0.0}, unit_normal(1)), ShapeError);
  CHECK_THROWS_AS(DiagGaussian({0.0}, {0.0}), DomainError);
  CHECK_THROWS_AS(DiagGaussian({0.0}, {-1.0}), DomainError);
}

TEST_CASE("kl_diag_gaussians closed form") {
  CHECK(kl_diag_gaussians(unit_normal(1), unit_normal(1)) == 0.0);
  CHECK(kl_diag_gaussians(DiagGaussian({1.0}, {1.0}), unit_normal(1)) ==
        Catch::Approx(0.5).margin(1e-12));
  CHECK(kl_diag_gaussians(DiagGaussian({0.0}, {4.0}), unit_normal(1)) ==
        Catch::Approx(0.8068528).margin(1e-7));
  CHECK_THROWS_AS(kl_diag_gaussians(unit_normal(2), unit_normal(3)), ShapeError);
}

TEST_CASE("kl_categorical hand values and edge cases") {
  CategoricalDist half({std::log(0.5), std::log(0.5)});
  CHECK(kl_categorical(half, half) == 0.0);
  CategoricalDist q({std::log(0.5), std::log(0.5)});
  CategoricalDist p({std::log(0.25), std::log(0.75)});
  CHECK(kl_categorical(q, p) == Catch::Approx(0.1438410).margin(1e-7));
  CategoricalDist point({0.0, -std::numeric_limits<double>::infinity()});
  CHECK(kl_categorical(point, half) == Catch::Approx(std::log(2.0)).margin(1e-12));
  // p gives zero mass where q does not -> infinity flag
  CHECK(std::isinf(kl_categorical(half, point)));
}

TEST_CASE("KL nonnegativity over random pairs") {
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + rng.integer(5);
    Vector mq(n), mp(n), vq(n), vp(n);
    for (std::size_t i = 0; i < n; ++i) {
      mq[i] = rng.normal();
      mp[i] = rng.normal();
      vq[i] = std::exp(rng.normal());
      vp[i] = std::exp(rng.normal());
    }
    CHECK(kl_diag_gaussians(DiagGaussian(mq, vq), DiagGaussian(mp, vp)) >= 0.0);

    std::size_t c = 2 + rng.integer(5);
    Vector lq(c), lp(c);
    for (std::size_t i = 0; i < c; ++i) {
      lq[i] = 3.0 * rng.normal();
      lp[i] = 3.0 * rng.normal();
    }
    CHECK(kl_categorical(log_softmax(lq), log_softmax(lp)) >= 0.0);
  }
}

TEST_CASE("log_softmax stability and normalization") {
  CategoricalDist a = log_softmax({0.0, 0.0});
  CHECK(a.log_probs[0] == Catch::Approx(std::log(0.5)).margin(1e-12));
  CategoricalDist b = log_softmax({1000.0, 1000.0});
  CHECK(b.log_probs[1] == Catch::Approx(std::log(0.5)).margin(1e-12));
  CategoricalDist c = log_softmax({0.0, std::log(3.0)});
  CHECK(std::exp(c.log_probs[0]) == Catch::Approx(0.25).margin(1e-12));
  CHECK(std::exp(c.log_probs[1]) == Catch::Approx(0.75).margin(1e-12));
  CHECK_THROWS_AS(log_softmax(Vector{}), ShapeError);

  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng.integer(8);
    Vector logits(n);
    for (auto& x : logits) x = rng.uniform(-1e4, 1e4);
    CategoricalDist d = log_softmax(logits);
    double total = 0.0;
    for (double lp : d.log_probs) total += std::exp(lp);
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("pinv on simple matrices") {
  Matrix eye = Matrix::identity(2);
  Matrix pe = pinv(eye);
  CHECK(pe(0, 0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(pe(0, 1) == Catch::Approx(0.0).margin(1e-12));

  Matrix d{{-1.0, 0.0}, {0.0, -2.0}};
  Matrix pd = pinv(d);
  CHECK(pd(0, 0) == Catch::Approx(-1.0).margin(1e-10));
  CHECK(pd(1, 1) == Catch::Approx(-0.5).margin(1e-10));

  Matrix z(2, 3);
  Matrix pz = pinv(z);
  CHECK(pz.rows() == 3);
  CHECK(pz.cols() == 2);
  CHECK(frobenius_norm(pz) == 0.0);
}

TEST_CASE("pinv satisfies the Penrose identities, including rank-deficient input") {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t r = 1 + rng.integer(5), c = 1 + rng.integer(5);
    Matrix a = rng.normal_matrix(r, c);
    if (trial % 3 == 0 && r > 1) {
      // duplicate a row to force rank deficiency
      a.set_row(r - 1, a.row(0));
    }
    Matrix ap = pinv(a);
    Matrix aapa = matmul(matmul(a, ap), a);
    Matrix apaap = matmul(matmul(ap, a), ap);
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.cols(); ++j)
        CHECK(std::abs(aapa(i, j) - a(i, j)) < 1e-8);
    for (std::size_t i = 0; i < ap.rows(); ++i)
      for (std::size_t j = 0; j < ap.cols(); ++j)
        CHECK(std::abs(apaap(i, j) - ap(i, j)) < 1e-8);
    Matrix aap = matmul(a, ap);
    Matrix apa = matmul(ap, a);
    for (std::size_t i = 0; i < aap.rows(); ++i)
      for (std::size_t j = 0; j < aap.cols(); ++j)
        CHECK(std::abs(aap(i, j) - aap(j, i)) < 1e-8);
    for (std::size_t i = 0; i < apa.rows(); ++i)
      for (std::size_t j = 0; j < apa.cols(); ++j)
        CHECK(std::abs(apa(i, j) - apa(j, i)) < 1e-8);
  }
}

TEST_CASE("eigvals on known spectra") {
  Matrix d{{0.3, 0.0}, {0.0, 0.9}};
  auto ev = eigvals(d);
  REQUIRE(ev.size() == 2);
  double lo = std::min(ev[0].real(), ev[1].real());
  double hi = std::max(ev[0].real(), ev[1].real());
  CHECK(lo == Catch::Approx(0.3).margin(1e-10));
  CHECK(hi == Catch::Approx(0.9).margin(1e-10));

  Matrix rot{{0.0, -1.0}, {1.0, 0.0}};
  auto evr = eigvals(rot);
  REQUIRE(evr.size() == 2);
  CHECK(std::abs(evr[0].real()) < 1e-10);
  CHECK(std::abs(std::abs(evr[0].imag()) - 1.0) < 1e-10);
  CHECK(std::abs(evr[0].imag() + evr[1].imag()) < 1e-10);

  CHECK_THROWS_AS(eigvals(Matrix(2, 3)), ShapeError);
}

TEST_CASE("eigvals match trace and determinant invariants on random symmetric 3x3") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix a = rng.normal_matrix(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
    auto ev = eigvals(a);
    std::complex<double> sum = 0.0, prod = 1.0;
    for (auto& e : ev) {
      sum += e;
      prod *= e;
    }
    double trace = a(0, 0) + a(1, 1) + a(2, 2);
    CHECK(std::abs(sum.real() - trace) < 1e-8);
    CHECK(std::abs(sum.imag()) < 1e-8);
    CHECK(std::abs(prod.real() - det3(a)) < 1e-6);
  }
}

TEST_CASE("deterministic rng with serializable state") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());

  std::string state = a.serialize();
  Rng c = Rng::deserialize(state);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == c.uniform());

  // substreams do not collide with the parent stream
  Rng parent(9);
  Rng s0 = parent.substream(0), s1 = parent.substream(1);
  CHECK(s0.normal() != s1.normal());
}

TEST_CASE("box-muller moments") {
  Rng rng(77);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  // 3 standard errors
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("matmul agrees with a hand product") {
  Matrix a{{1.0, 2.0}, {3.0, 4.0}};
  Matrix b{{5.0, 6.0}, {7.0, 8.0}};
  Matrix c = matmul(a, b);
  CHECK(c(0, 0) == 19.0);
  CHECK(c(0, 1) == 22.0);
  CHECK(c(1, 0) == 43.0);
  CHECK(c(1, 1) == 50.0);
  Matrix cnt = matmul_nt(a, transpose(b));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(cnt(i, j) == c(i, j));
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
}
