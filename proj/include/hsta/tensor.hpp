#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace hsta {

/// Shape or extent mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller violated an operation's precondition.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent or unsupported configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ArrayMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrayMap = Eigen::Map<const Eigen::ArrayXd>;

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

/// Dense row-major array of doubles. Extents may be zero only along the
/// leading axis (empty row sets arise from splitting).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor filled(Shape shape, double value);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row(std::initializer_list<double> values);
  static Tensor from_eigen(const RowMatrix& m);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  /// Leading extent of a rank-2 tensor.
  std::size_t rows() const;
  /// Trailing extent of a rank-2 tensor.
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  MatrixMap mat();
  ConstMatrixMap mat() const;
  ArrayMap arr() { return {data_.data(), static_cast<Eigen::Index>(data_.size())}; }
  ConstArrayMap arr() const { return {data_.data(), static_cast<Eigen::Index>(data_.size())}; }

  Tensor reshaped(Shape shape) const;
  void fill(double value);
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t element_count(const Shape& shape);

// Value-level primitives. Each has a differentiable counterpart in autodiff.hpp.

/// Matrix product with a fixed per-element accumulation order over k.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// a^T * b.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
Tensor concat_rows(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> split_rows(const Tensor& x, std::size_t p);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor gelu(const Tensor& x);

/// Elementwise maximum absolute difference; shapes must agree.
double max_abs_diff(const Tensor& a, const Tensor& b);

inline constexpr double kLayerNormEps = 1e-5;

}  // namespace hsta
