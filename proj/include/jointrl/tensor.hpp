#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <cstring>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointrl/rng.hpp"

namespace jointrl {

// 64-byte-aligned allocator for tensor storage. Eigen's kernels pick
// alignment-dependent code paths; fixing the alignment keeps results
// bit-identical across reruns.
template <typename T, size_t Align = 64>
struct AlignedAlloc {
  using value_type = T;
  AlignedAlloc() = default;
  template <class U>
  AlignedAlloc(const AlignedAlloc<U, Align>&) {}
  T* allocate(size_t n) {
    const size_t bytes = ((n * sizeof(T) + Align - 1) / Align) * Align;
    void* p = std::aligned_alloc(Align, bytes);
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, size_t) noexcept { std::free(p); }
  // default-init instead of value-init: vector::resize(n) on trivial scalars
  // leaves the memory uninitialized, so buffers that are fully overwritten
  // skip a redundant zero pass. Explicit fills (vector(n, v)) still happen.
  template <class U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
  template <class U>
  struct rebind {
    using other = AlignedAlloc<U, Align>;
  };
  bool operator==(const AlignedAlloc&) const { return true; }
  bool operator!=(const AlignedAlloc&) const { return false; }
};

// Dense row-major tensor with value semantics. Rank-n shapes are kept, but
// most ops view a tensor as (rows = shape[0]) x (cols = everything else);
// conv ops interpret 4-d shapes explicitly.
template <typename T>
class TensorT {
 public:
  using Scalar = T;
  template <typename U>
  using MatMap = Eigen::Map<Eigen::Matrix<U, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  template <typename U>
  using ConstMatMap =
      Eigen::Map<const Eigen::Matrix<U, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  template <typename U>
  using ArrMap = Eigen::Map<Eigen::Array<U, Eigen::Dynamic, 1>>;
  template <typename U>
  using ConstArrMap = Eigen::Map<const Eigen::Array<U, Eigen::Dynamic, 1>>;

  using Storage = std::vector<T, AlignedAlloc<T>>;

  TensorT() = default;
  explicit TensorT(std::vector<long> shape)
      : shape_(std::move(shape)), data_(checked_count(shape_), T(0)) {}
  TensorT(std::vector<long> shape, std::vector<T> data) : shape_(std::move(shape)) {
    if (static_cast<long>(data.size()) != checked_count(shape_))
      throw std::invalid_argument("tensor: data size does not match shape");
    data_.assign(data.begin(), data.end());
  }

  static TensorT zeros(std::vector<long> shape) { return TensorT(std::move(shape)); }
  // Uninitialized storage; callers must overwrite every element.
  static TensorT uninit(std::vector<long> shape) {
    TensorT t;
    t.shape_ = std::move(shape);
    t.data_.resize(static_cast<size_t>(checked_count(t.shape_)));
    return t;
  }
  static TensorT full(std::vector<long> shape, T v) {
    TensorT t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }
  static TensorT scalar(T v) { return full({1}, v); }
  static TensorT uniform(std::vector<long> shape, T lo, T hi, RandomStream& rng) {
    TensorT t(std::move(shape));
    for (auto& x : t.data_) x = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }
  static TensorT normal(std::vector<long> shape, T mean, T stddev, RandomStream& rng) {
    TensorT t(std::move(shape));
    for (auto& x : t.data_) x = mean + stddev * static_cast<T>(rng.normal());
    return t;
  }

  long size() const { return static_cast<long>(data_.size()); }
  bool empty() const { return data_.empty(); }
  const std::vector<long>& shape() const { return shape_; }
  long dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int rank() const { return static_cast<int>(shape_.size()); }

  long rows() const { return shape_.empty() ? 0 : shape_[0]; }
  long cols() const { return shape_.empty() ? 0 : size() / std::max<long>(1, shape_[0]); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](long i) { return data_[static_cast<size_t>(i)]; }
  T operator[](long i) const { return data_[static_cast<size_t>(i)]; }
  T& at2(long r, long c) { return data_[static_cast<size_t>(r * cols() + c)]; }
  T at2(long r, long c) const { return data_[static_cast<size_t>(r * cols() + c)]; }

  MatMap<T> mat() { return MatMap<T>(data(), rows(), cols()); }
  ConstMatMap<T> mat() const { return ConstMatMap<T>(data(), rows(), cols()); }
  MatMap<T> mat(long r, long c) { return MatMap<T>(data(), r, c); }
  ConstMatMap<T> mat(long r, long c) const { return ConstMatMap<T>(data(), r, c); }
  ArrMap<T> arr() { return ArrMap<T>(data(), size()); }
  ConstArrMap<T> arr() const { return ConstArrMap<T>(data(), size()); }

  TensorT reshaped(std::vector<long> shape) const {
    TensorT out = *this;
    if (checked_count(shape) != size()) throw std::invalid_argument("reshape: element count mismatch");
    out.shape_ = std::move(shape);
    return out;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void set_zero() { fill(T(0)); }

  bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape_);
    for (long i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

  static long checked_count(const std::vector<long>& shape) {
    long n = 1;
    for (long d : shape) {
      if (d < 0) throw std::invalid_argument("tensor: negative dimension");
      n *= d;
    }
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<long> shape_;
  Storage data_;
};

template <typename U>
TensorT<U> tensor_of(std::vector<long> shape, std::initializer_list<U> vals) {
  return TensorT<U>(std::move(shape), std::vector<U>(vals));
}

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

inline std::string shape_str(const std::vector<long>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

}  // namespace jointrl
