#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace fsfl {

/// Thrown on any dimension mismatch. The message names both shapes involved.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense shape-carrying numeric array, row-major. T is float for training,
/// double for the gradient-check shadow mode.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> dims) : shape(std::move(dims)) {
    data.assign(checked_numel(shape), T(0));
  }

  Tensor(std::vector<int> dims, std::vector<T> values)
      : shape(std::move(dims)), data(std::move(values)) {
    if (checked_numel(shape) != data.size()) {
      throw ShapeError("tensor: shape " + shape_str(shape) + " needs " +
                       std::to_string(checked_numel(shape)) + " values, got " +
                       std::to_string(data.size()));
    }
  }

  static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }

  static Tensor full(std::vector<int> dims, T v) {
    Tensor t(std::move(dims));
    for (auto& x : t.data) x = v;
    return t;
  }

  size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  T& operator()(int i) { return data[static_cast<size_t>(i)]; }
  const T& operator()(int i) const { return data[static_cast<size_t>(i)]; }

  T& operator()(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
  const T& operator()(int i, int j) const {
    return data[static_cast<size_t>(i) * shape[1] + j];
  }

  T& operator()(int i, int j, int k) {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  const T& operator()(int i, int j, int k) const {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  bool operator==(const Tensor& o) const { return shape == o.shape && data == o.data; }

  std::string shape_str() const { return shape_str(shape); }

  static std::string shape_str(const std::vector<int>& dims) {
    std::string s = "[";
    for (size_t i = 0; i < dims.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(dims[i]);
    }
    return s + "]";
  }

  static size_t checked_numel(const std::vector<int>& dims) {
    size_t n = 1;
    for (int d : dims) {
      if (d <= 0) throw ShapeError("tensor: non-positive dim in " + shape_str(dims));
      n *= static_cast<size_t>(d);
    }
    return n;
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T>
inline void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* where) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(where) + ": shape " + a.shape_str() + " vs " +
                     b.shape_str());
  }
}

}  // namespace fsfl
