#pragma once

#include "jointrl/ops.hpp"

namespace jointrl {

template <typename T>
using NamedParams = std::vector<std::pair<std::string, VarT<T>>>;

template <typename T>
std::vector<VarT<T>> strip_names(const NamedParams<T>& named) {
  std::vector<VarT<T>> out;
  out.reserve(named.size());
  for (const auto& [name, v] : named) out.push_back(v);
  return out;
}

template <typename T>
class LinearT {
 public:
  LinearT() = default;
  LinearT(long in, long out, RandomStream& rng) : in_(in), out_(out) {
    const T bound = std::sqrt(T(1) / static_cast<T>(in));
    w_ = VarT<T>::leaf(TensorT<T>::uniform({out, in}, -bound, bound, rng), true);
    b_ = VarT<T>::leaf(TensorT<T>::uniform({1, out}, -bound, bound, rng), true);
  }
  VarT<T> forward(const VarT<T>& x) const { return add_rowvec(matmul(x, w_, false, true), b_); }
  void collect(NamedParams<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".w", w_);
    out.emplace_back(prefix + ".b", b_);
  }
  long in_dim() const { return in_; }
  long out_dim() const { return out_; }
  VarT<T>& weight() { return w_; }
  VarT<T>& bias() { return b_; }

 private:
  long in_ = 0, out_ = 0;
  VarT<T> w_, b_;
};

template <typename T>
class Conv2dT {
 public:
  Conv2dT() = default;
  Conv2dT(long in_ch, long out_ch, long k, long stride, long pad, RandomStream& rng)
      : stride_(stride), pad_(pad) {
    const T bound = std::sqrt(T(1) / static_cast<T>(in_ch * k * k));
    w_ = VarT<T>::leaf(TensorT<T>::uniform({out_ch, in_ch, k, k}, -bound, bound, rng), true);
    b_ = VarT<T>::leaf(TensorT<T>::uniform({out_ch}, -bound, bound, rng), true);
  }
  VarT<T> forward(const VarT<T>& x) const { return conv2d(x, w_, b_, stride_, pad_); }
  void collect(NamedParams<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".w", w_);
    out.emplace_back(prefix + ".b", b_);
  }
  long out_size(long in_size) const {
    return (in_size + 2 * pad_ - w_.value().dim(2)) / stride_ + 1;
  }
  long out_channels() const { return w_.value().dim(0); }

 private:
  long stride_ = 1, pad_ = 0;
  VarT<T> w_, b_;
};

template <typename T>
class ConvT2dT {
 public:
  ConvT2dT() = default;
  ConvT2dT(long in_ch, long out_ch, long k, long stride, long out_pad, RandomStream& rng)
      : stride_(stride), out_pad_(out_pad) {
    const T bound = std::sqrt(T(1) / static_cast<T>(in_ch * k * k));
    w_ = VarT<T>::leaf(TensorT<T>::uniform({in_ch, out_ch, k, k}, -bound, bound, rng), true);
    b_ = VarT<T>::leaf(TensorT<T>::uniform({out_ch}, -bound, bound, rng), true);
  }
  VarT<T> forward(const VarT<T>& x) const {
    return conv2d_transpose(x, w_, b_, stride_, out_pad_);
  }
  void collect(NamedParams<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".w", w_);
    out.emplace_back(prefix + ".b", b_);
  }
  long out_size(long in_size) const {
    return (in_size - 1) * stride_ + w_.value().dim(2) + out_pad_;
  }

 private:
  long stride_ = 1, out_pad_ = 0;
  VarT<T> w_, b_;
};

template <typename T>
class LayerNormT {
 public:
  LayerNormT() = default;
  explicit LayerNormT(long dim) {
    gamma_ = VarT<T>::leaf(TensorT<T>::full({1, dim}, T(1)), true);
    beta_ = VarT<T>::leaf(TensorT<T>::zeros({1, dim}), true);
  }
  VarT<T> forward(const VarT<T>& x) const { return layer_norm_rows(x, gamma_, beta_); }
  void collect(NamedParams<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".gamma", gamma_);
    out.emplace_back(prefix + ".beta", beta_);
  }

 private:
  VarT<T> gamma_, beta_;
};

// Plain fully connected stack with ReLU between layers and a linear output.
template <typename T>
class MlpT {
 public:
  MlpT() = default;
  MlpT(long in, const std::vector<long>& hidden, long out, RandomStream& rng) {
    long cur = in;
    for (long h : hidden) {
      layers_.emplace_back(cur, h, rng);
      cur = h;
    }
    layers_.emplace_back(cur, out, rng);
  }
  VarT<T> forward(const VarT<T>& x) const {
    VarT<T> h = x;
    for (size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i].forward(h);
      if (i + 1 < layers_.size()) h = relu(h);
    }
    return h;
  }
  void collect(NamedParams<T>& out, const std::string& prefix) const {
    for (size_t i = 0; i < layers_.size(); ++i)
      layers_[i].collect(out, prefix + ".fc" + std::to_string(i));
  }
  long out_dim() const { return layers_.back().out_dim(); }

 private:
  std::vector<LinearT<T>> layers_;
};

using Linear = LinearT<float>;
using Mlp = MlpT<float>;

}  // namespace jointrl
