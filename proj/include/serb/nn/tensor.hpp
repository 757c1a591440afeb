#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace serb::nn {

/// Dense row-major f64 tensor. Layers use the (batch, frames, features) layout.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  bool all_finite() const;
  std::string shape_string() const;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

/// C (m x n) = alpha * op(A) * op(B) + beta * C, row-major with leading
/// dimensions. op(A) is m x k; when trans_a, A is stored k x m.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc);

}  // namespace serb::nn
