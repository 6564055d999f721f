#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "saber/error.hpp"
#include "saber/mat.hpp"
#include "saber/rng.hpp"

using namespace saber;

namespace {

Mat random_mat(Rng& rng, std::size_t r, std::size_t c) {
  Mat m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::fabs(a.data()[i] - b.data()[i]));
  }
  return d;
}

}  // namespace

TEST_CASE("matmul on a known product") {
  Mat a(2, 3);
  a(0, 0) = 1; a(0, 1) = 2; a(0, 2) = 3;
  a(1, 0) = 4; a(1, 1) = 5; a(1, 2) = 6;
  Mat b(3, 2);
  b(0, 0) = 7;  b(0, 1) = 8;
  b(1, 0) = 9;  b(1, 1) = 10;
  b(2, 0) = 11; b(2, 1) = 12;
  const Mat c = matmul(a, b);
  CHECK(c(0, 0) == 58.0);
  CHECK(c(0, 1) == 64.0);
  CHECK(c(1, 0) == 139.0);
  CHECK(c(1, 1) == 154.0);
  CHECK_THROWS_AS(matmul(a, a), Error);
}

TEST_CASE("transpose and identity") {
  Rng rng(7);
  const Mat a = random_mat(rng, 4, 7);
  const Mat at = a.transposed();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) CHECK(at(c, r) == a(r, c));
  }
  const Mat i5 = Mat::identity(5);
  const Mat b = random_mat(rng, 5, 5);
  CHECK(max_abs_diff(matmul(i5, b), b) == 0.0);
  CHECK(max_abs_diff(matmul(b, i5), b) == 0.0);
}

TEST_CASE("lu_solve recovers a known solution") {
  Rng rng(42);
  for (const std::size_t n : {2u, 6u, 16u, 33u}) {
    Mat a = random_mat(rng, n, n);
    for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);  // well-conditioned
    const Mat x_true = random_mat(rng, n, 3);
    const Mat b = matmul(a, x_true);
    const Mat x = lu_solve(a, b);
    CHECK(max_abs_diff(x, x_true) < 1e-9);
  }
}

TEST_CASE("inverse roundtrip and cond1") {
  Rng rng(3);
  Mat a = random_mat(rng, 8, 8);
  for (std::size_t i = 0; i < 8; ++i) a(i, i) += 8.0;
  const Mat ainv = inverse(a);
  CHECK(max_abs_diff(matmul(a, ainv), Mat::identity(8)) < 1e-10);

  CHECK(cond1(Mat::identity(6)) == doctest::Approx(1.0));
  Mat d = Mat::identity(4);
  d(3, 3) = 1e-6;  // cond = 1e6 for a diagonal matrix
  CHECK(cond1(d) == doctest::Approx(1e6).epsilon(1e-9));
}

TEST_CASE("singular matrix raises a numeric error") {
  Mat s(3, 3);
  s(0, 0) = 1; s(0, 1) = 2; s(0, 2) = 3;
  s(1, 0) = 2; s(1, 1) = 4; s(1, 2) = 6;  // row 1 = 2 x row 0
  s(2, 0) = 1; s(2, 1) = 0; s(2, 2) = 1;
  try {
    lu_solve(s, Mat::identity(3));
    FAIL("expected a singular-matrix error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
  }
}

TEST_CASE("norms") {
  Mat m(2, 2);
  m(0, 0) = 1; m(0, 1) = -2;
  m(1, 0) = 3; m(1, 1) = 4;
  CHECK(m.norm1() == 6.0);  // max column |sum|: |{-2,4}| column = 6
  CHECK(m.frobenius() == doctest::Approx(std::sqrt(30.0)));
}
