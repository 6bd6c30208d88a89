#include <cmath>
#include <limits>

#include "doctest.h"
#include "epc/error.hpp"
#include "epc/numcore.hpp"
#include "epc/rng.hpp"

using namespace epc;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1, double hi = 1) {
  Matrix m(r, c);
  for (auto& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind{};
}

}  // namespace

TEST_CASE("matrix construction checks size and finiteness") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), Error);
  CHECK(kind_of([] { Matrix(1, 1, std::vector<double>{std::nan("")}); }) == ErrorKind::kDomain);
  const Matrix m{{1, 2}, {3, 4}};
  CHECK(m.rows() == 2);
  CHECK(m(1, 0) == 3);
  CHECK(m.shape_string() == "2x2");
  CHECK(m.transposed()(0, 1) == 3);
}

TEST_CASE("matmul_nt small cases") {
  const Matrix eye{{1, 0}, {0, 1}};
  CHECK(matmul_nt(eye, eye) == eye);
  const Matrix a{{1, 2}};
  const Matrix b{{3, 4}};
  CHECK(matmul_nt(a, b)(0, 0) == 11.0);
}

TEST_CASE("matmul_nt shape error names both shapes") {
  const Matrix a(2, 3), b(2, 4);
  try {
    matmul_nt(a, b);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("2x4") != std::string::npos);
  }
}

TEST_CASE("matmul variants match a triple-loop oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t r = 1 + rng.below(64), k = 1 + rng.below(64), c = 1 + rng.below(64);
    const Matrix a = random_matrix(rng, r, k), b = random_matrix(rng, c, k);
    const Matrix got = matmul_nt(a, b);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        double s = 0;
        for (std::size_t t = 0; t < k; ++t) s += a(i, t) * b(j, t);
        CHECK(std::abs(got(i, j) - s) <= 1e-12 * std::max(1.0, std::abs(s)));
      }
    const Matrix nn = matmul_nn(a, b.transposed());
    const Matrix tn = matmul_tn(a.transposed(), b.transposed());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(std::abs(nn.values()[i] - got.values()[i]) <= 1e-12);
      CHECK(std::abs(tn.values()[i] - got.values()[i]) <= 1e-12);
    }
  }
  CHECK_THROWS_AS(matmul_nn(Matrix(2, 3), Matrix(2, 3)), Error);
  CHECK_THROWS_AS(matmul_tn(Matrix(2, 3), Matrix(3, 3)), Error);
}

TEST_CASE("row_l2_normalize") {
  const Matrix n = row_l2_normalize(Matrix{{3, 4}});
  CHECK(n(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(row_l2_normalize(Matrix{{0, 0}}) == Matrix{{0, 0}});

  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const Matrix m = random_matrix(rng, 4, 4);
    const Matrix y = row_l2_normalize(m);
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (double v : y.row(r)) s += v * v;
      const double norm = std::sqrt(s);
      CHECK((norm == 0.0 || std::abs(norm - 1.0) <= 1e-9));
    }
    const Matrix yy = row_l2_normalize(y);
    for (std::size_t i = 0; i < y.size(); ++i)
      CHECK(std::abs(yy.values()[i] - y.values()[i]) <= 1e-12);
  }
}

TEST_CASE("normalize backward matches finite differences") {
  Rng rng(11);
  const Matrix x = random_matrix(rng, 3, 4);
  const Matrix g = random_matrix(rng, 3, 4);
  for (int col = 0; col < 2; ++col) {
    auto fwd = [&](const Matrix& m) { return col ? col_l2_normalize(m) : row_l2_normalize(m); };
    const Matrix analytic = col ? col_l2_normalize_backward(x, g) : row_l2_normalize_backward(x, g);
    for (std::size_t i = 0; i < x.size(); ++i) {
      Matrix xp = x, xm = x;
      xp.data()[i] += 1e-6;
      xm.data()[i] -= 1e-6;
      const Matrix yp = fwd(xp), ym = fwd(xm);
      double fd = 0;
      for (std::size_t j = 0; j < g.size(); ++j)
        fd += g.values()[j] * (yp.values()[j] - ym.values()[j]) / 2e-6;
      CHECK(std::abs(fd - analytic.values()[i]) <= 1e-7);
    }
  }
}

TEST_CASE("logsumexp") {
  const std::vector<double> zero{0.0};
  CHECK(logsumexp(zero) == 0.0);
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(logsumexp(big) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  const std::vector<double> one{-3.25};
  CHECK(logsumexp(one) == -3.25);
  CHECK(kind_of([] { logsumexp(std::vector<double>{}); }) == ErrorKind::kEmptyReduction);

  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> v(100);
    for (auto& x : v) x = rng.uniform(-5, 5);
    double direct = 0;
    for (double x : v) direct += std::exp(x);
    const double lse = logsumexp(v);
    CHECK(std::abs(lse - std::log(direct)) <= 1e-12 * std::abs(std::log(direct)) + 1e-12);
    const double mx = *std::max_element(v.begin(), v.end());
    CHECK(lse >= mx);
    CHECK(lse <= mx + std::log(100.0));
  }
}

TEST_CASE("pairwise_sum is order-fixed and accurate") {
  Rng rng(9);
  std::vector<double> v(1000);
  for (auto& x : v) x = rng.uniform(-1, 1);
  double direct = 0;
  for (double x : v) direct += x;
  CHECK(std::abs(pairwise_sum(v) - direct) <= 1e-12);
  CHECK(pairwise_sum(v) == pairwise_sum(v));
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
}

TEST_CASE("axpy and scaled") {
  Matrix y{{1, 1}};
  axpy(2.0, Matrix{{1, 2}}, y);
  CHECK(y == Matrix{{3, 5}});
  CHECK(scaled(y, 0.5) == Matrix{{1.5, 2.5}});
  CHECK_THROWS_AS(axpy(1.0, Matrix(1, 3), y), Error);
}
