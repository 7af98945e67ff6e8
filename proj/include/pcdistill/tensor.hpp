#pragma once

#include <cblas.h>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcdistill {

// Dense row-major 64-bit float tensor. Rank 0 (scalar), 1 and 2 are what the
// training stack actually uses.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != numel_of(shape)) throw std::invalid_argument("tensor: value count does not match shape");
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    const std::size_t n = numel_of(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }

  static Tensor full(std::vector<std::size_t> s, double v) {
    const std::size_t n = numel_of(s);
    return Tensor(std::move(s), std::vector<double>(n, v));
  }

  static Tensor scalar(double v) { return Tensor({}, {v}); }

  std::size_t numel() const { return values.size(); }
  bool is_scalar() const { return shape.empty() || numel() == 1; }
  double scalar_value() const {
    if (numel() != 1) throw std::logic_error("tensor: not a scalar");
    return values[0];
  }

  std::size_t rows() const { return shape.size() == 2 ? shape[0] : (shape.size() == 1 ? shape[0] : 1); }
  std::size_t cols() const { return shape.size() == 2 ? shape[1] : 1; }

  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

namespace detail {

// C (m x n) = alpha * op(A) * op(B) + beta * C, row-major. Thin wrapper so the
// autodiff rules read as math. OpenBLAS honors OPENBLAS_NUM_THREADS; the
// training stack is single-threaded either way.
inline void dgemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                  double alpha, const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double beta, double* c, std::size_t ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb),
              beta, c, static_cast<int>(ldc));
}

}  // namespace detail

}  // namespace pcdistill
