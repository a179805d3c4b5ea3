#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "attloc/errors.hpp"
#include "attloc/numerics.hpp"
#include "oracles.hpp"

using namespace attloc;

namespace {

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& row : rows) {
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

}  // namespace

TEST_CASE("matmul identity and hand cases") {
  const Matrix id = from_rows({{1, 0}, {0, 1}});
  const Matrix v = from_rows({{3}, {4}});
  const Matrix r = matmul(id, v);
  CHECK(r(0, 0) == 3.0);
  CHECK(r(1, 0) == 4.0);

  const Matrix a = from_rows({{1, 2}});
  const Matrix b = from_rows({{3}, {4}});
  CHECK(matmul(a, b)(0, 0) == 11.0);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  Rng rng(42);
  const Matrix a = oracle::random_matrix(rng, 5, 4);
  const Matrix b = oracle::random_matrix(rng, 4, 3);
  CHECK(max_abs_diff(matmul(a, b), oracle::naive_matmul(a, b)) < 1e-12);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const Matrix a(3, 4);
  const Matrix b(5, 2);
  try {
    matmul(a, b);
    FAIL("expected a shape error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("3x4") != std::string::npos);
    CHECK(msg.find("5x2") != std::string::npos);
  }
}

TEST_CASE("matmul associativity on random 8x8 chains") {
  Rng rng(7);
  for (int it = 0; it < 10; ++it) {
    const Matrix a = oracle::random_matrix(rng, 8, 8);
    const Matrix b = oracle::random_matrix(rng, 8, 8);
    const Matrix c = oracle::random_matrix(rng, 8, 8);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    double scale = 0.0;
    for (std::size_t i = 0; i < left.size(); ++i) scale = std::max(scale, std::abs(left.data()[i]));
    CHECK(max_abs_diff(left, right) / std::max(scale, 1.0) < 1e-9);
  }
}

TEST_CASE("matmul_nt and matmul_tn agree with explicit transposes") {
  Rng rng(3);
  const Matrix a = oracle::random_matrix(rng, 6, 5);
  const Matrix b = oracle::random_matrix(rng, 7, 5);
  Matrix bt(5, 7);
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) bt(j, i) = b(i, j);
  CHECK(max_abs_diff(matmul_nt(a, b), oracle::naive_matmul(a, bt)) < 1e-12);

  const Matrix c = oracle::random_matrix(rng, 6, 4);
  Matrix at(5, 6);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) at(j, i) = a(i, j);
  CHECK(max_abs_diff(matmul_tn(a, c), oracle::naive_matmul(at, c)) < 1e-12);
}

TEST_CASE("matvec kernels match the oracle") {
  Rng rng(11);
  const Matrix m = oracle::random_matrix(rng, 9, 6);
  const Matrix x = oracle::random_matrix(rng, 6, 1);
  std::vector<double> y(9);
  matvec(m, x.data(), y.data());
  const Matrix expected = oracle::naive_matmul(m, x);
  for (std::size_t i = 0; i < 9; ++i) CHECK(std::abs(y[i] - expected(i, 0)) < 1e-12);

  const Matrix z = oracle::random_matrix(rng, 9, 1);
  std::vector<double> acc(6, 0.5);
  matvec_t_add(m, z.data(), acc.data());
  Matrix mt(6, 9);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) mt(j, i) = m(i, j);
  const Matrix expected_t = oracle::naive_matmul(mt, z);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(acc[i] - (0.5 + expected_t(i, 0))) < 1e-12);
}

TEST_CASE("sigmoid symmetry and saturation") {
  CHECK(sigmoid(0.0) == 0.5);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-30.0, 30.0);
    CHECK(std::abs(sigmoid(x) + sigmoid(-x) - 1.0) < 1e-12);
  }
  CHECK(sigmoid(40.0) == 1.0);
  CHECK(sigmoid(-750.0) == 0.0);
}

TEST_CASE("relu definition") {
  Matrix m(1, 2);
  m(0, 0) = -2.5;
  m(0, 1) = 3.0;
  const Matrix r = relu(m);
  CHECK(r(0, 0) == 0.0);
  CHECK(r(0, 1) == 3.0);
}

TEST_CASE("softmax_rows uniform, sums, shift invariance") {
  const Matrix zero(1, 7);
  const Matrix uniform = softmax_rows(zero);
  for (std::size_t j = 0; j < 7; ++j) {
    CHECK(uniform(0, j) == doctest::Approx(1.0 / 7).epsilon(1e-14));
  }

  Rng rng(9);
  for (int it = 0; it < 50; ++it) {
    const Matrix x = oracle::random_matrix(rng, 4, 7, -20.0, 20.0);
    const Matrix sm = softmax_rows(x);
    Matrix shifted = x;
    const double c = rng.uniform(-100.0, 100.0);
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted.data()[i] += c;
    const Matrix sm2 = softmax_rows(shifted);
    for (std::size_t i = 0; i < sm.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < sm.cols(); ++j) sum += sm(i, j);
      CHECK(std::abs(sum - 1.0) < 1e-12);
      for (std::size_t j = 0; j < sm.cols(); ++j) CHECK(std::abs(sm(i, j) - sm2(i, j)) < 1e-12);
    }
  }
}

TEST_CASE("elementwise ops reject NaN input") {
  Matrix m(1, 1);
  m(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(sigmoid(m), NumericError);
  CHECK_THROWS_AS(relu(m), NumericError);
  CHECK_THROWS_AS(tanh(m), NumericError);
  CHECK_THROWS_AS(softmax_rows(m), NumericError);
}

TEST_CASE("reverse_rows") {
  Rng rng(13);
  const Matrix m = oracle::random_matrix(rng, 5, 3);
  const Matrix r = reverse_rows(m);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(r(i, j) == m(4 - i, j));
  CHECK(reverse_rows(r) == m);
}

TEST_CASE("rng determinism and range") {
  Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const double va = a.uniform();
    const double vb = b.uniform();
    const double vc = c.uniform();
    all_equal &= (va == vb);
    any_diff |= (va != vc);
    CHECK(va >= 0.0);
    CHECK(va < 1.0);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("rng below and derive") {
  Rng rng(77);
  std::set<std::size_t> seen;
  for (int i = 0; i < 500; ++i) {
    const std::size_t v = rng.below(10);
    CHECK(v < 10);
    seen.insert(v);
  }
  CHECK(seen.size() == 10);

  // derive depends on the seed and label only, not on stream consumption
  Rng fresh(77);
  Rng d1 = rng.derive(5);
  Rng d2 = fresh.derive(5);
  Rng d3 = fresh.derive(6);
  bool same = true, diff = false;
  for (int i = 0; i < 100; ++i) {
    const double v1 = d1.uniform();
    same &= (v1 == d2.uniform());
    diff |= (v1 != d3.uniform());
  }
  CHECK(same);
  CHECK(diff);
}
