#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssad {

/// Base exception for every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Allocates on 64-byte boundaries. Vectorized reductions peel a
/// misaligned prefix, so without a fixed alignment the summation order (and
/// the last bits of every result) would vary from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major array of doubles with a small dynamic shape.
///
/// Images and feature maps use the (channels, rows, cols) layout; embeddings
/// are rank-1; convolution weights are rank-4 (out, in, kh, kw).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, v); }

  const std::vector<int>& shape() const noexcept { return shape_; }
  int dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // (c, y, x) indexing for rank-3 tensors.
  double& at(int c, int y, int x) { return data_[index3(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index3(c, y, x)]; }

  double item() const;
  void fill(double v);
  Tensor reshaped(std::vector<int> shape) const;

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t index3(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x;
  }

  std::vector<int> shape_;
  AlignedBuffer data_;
};

std::size_t shape_size(const std::vector<int>& shape);
std::string shape_string(const std::vector<int>& shape);

bool all_finite(std::span<const double> values);

}  // namespace ssad
