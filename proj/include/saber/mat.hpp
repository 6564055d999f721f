#pragma once

#include <cstddef>
#include <vector>

namespace saber {

// Dense row-major matrix of doubles. Small and unfancy: the heavy per-sample
// loops live in the kernels, and the linear systems in this codebase are
// tiny (6x6 basis Grams, <=64x64 channel covariances).
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

  static Mat identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

  double* row(std::size_t r) { return v_.data() + r * cols_; }
  const double* row(std::size_t r) const { return v_.data() + r * cols_; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::size_t size() const { return v_.size(); }

  Mat transposed() const;

  double norm1() const;       // max column sum of |a_ij|
  double frobenius() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> v_;
};

// C = A * B
Mat matmul(const Mat& a, const Mat& b);

// Solve A X = B with partial-pivot LU. A must be square; throws
// ErrorKind::Numeric when singular to working precision.
Mat lu_solve(Mat a, Mat b);

Mat inverse(const Mat& a);

// 1-norm condition number estimate ||A||_1 * ||A^-1||_1 (exact inverse,
// fine at these sizes). Throws on singular input.
double cond1(const Mat& a);

}  // namespace saber
