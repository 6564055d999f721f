#include "saber/mat.hpp"

#include <cmath>
#include <cstdlib>

#include "saber/error.hpp"
#include "saber/kernels.hpp"

namespace saber {

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::transposed() const {
  Mat t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

double Mat::norm1() const {
  double best = 0.0;
  for (std::size_t c = 0; c < cols_; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) s += std::fabs((*this)(r, c));
    if (s > best) best = s;
  }
  return best;
}

double Mat::frobenius() const { return std::sqrt(kernels::sumsq(v_.data(), v_.size())); }

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) raise(ErrorKind::Numeric, "matmul: dimension mismatch");
  Mat c(a.rows(), b.cols());
  // i-k-j order keeps the inner loop contiguous on both b and c.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      kernels::axpy(a(i, k), b.row(k), ci, b.cols());
    }
  }
  return c;
}

Mat lu_solve(Mat a, Mat b) {
  if (a.rows() != a.cols()) raise(ErrorKind::Numeric, "lu_solve: matrix not square");
  if (a.rows() != b.rows()) raise(ErrorKind::Numeric, "lu_solve: rhs dimension mismatch");
  const std::size_t n = a.rows();

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    double best = std::fabs(a(col, col));
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::fabs(a(r, col));
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best == 0.0 || !std::isfinite(best)) {
      raise(ErrorKind::Numeric, "lu_solve: singular matrix");
    }
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(pivot, c));
      for (std::size_t c = 0; c < b.cols(); ++c) std::swap(b(col, c), b(pivot, c));
    }
    const double inv_piv = 1.0 / a(col, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) * inv_piv;
      if (f == 0.0) continue;
      a(r, col) = 0.0;
      for (std::size_t c = col + 1; c < n; ++c) a(r, c) -= f * a(col, c);
      kernels::axpy(-f, b.row(col), b.row(r), b.cols());
    }
  }

  for (std::size_t ri = n; ri-- > 0;) {
    for (std::size_t c = ri + 1; c < n; ++c) {
      kernels::axpy(-a(ri, c), b.row(c), b.row(ri), b.cols());
    }
    kernels::scale(b.row(ri), 1.0 / a(ri, ri), b.cols());
  }
  return b;
}

Mat inverse(const Mat& a) { return lu_solve(a, Mat::identity(a.rows())); }

double cond1(const Mat& a) { return a.norm1() * inverse(a).norm1(); }

}  // namespace saber
