#pragma once

#include <cmath>

#include "jointrl/autograd.hpp"

namespace jointrl {

namespace detail {

inline void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Gather conv patches: fills a (C*k*k) x (OH*OW) block for one image. The
// block starts at `cols` and each of the C*k*k rows is `row_pitch` apart, so
// several images can share one matrix as adjacent column blocks.
template <typename T>
void im2col(const T* img, long C, long H, long W, long k, long stride, long pad, long OH, long OW,
            T* cols, long row_pitch = -1) {
  const long P = OH * OW;
  if (row_pitch < 0) row_pitch = P;
  for (long c = 0; c < C; ++c) {
    const T* plane = img + c * H * W;
    for (long di = 0; di < k; ++di) {
      for (long dj = 0; dj < k; ++dj) {
        T* row = cols + ((c * k + di) * k + dj) * row_pitch;
        for (long i = 0; i < OH; ++i) {
          const long src_i = i * stride + di - pad;
          T* dst = row + i * OW;
          if (src_i < 0 || src_i >= H) {
            std::fill(dst, dst + OW, T(0));
            continue;
          }
          const T* src_row = plane + src_i * W;
          if (stride == 1) {
            const long j0 = std::max<long>(0, pad - dj);
            const long j1 = std::min<long>(OW, W + pad - dj);
            if (j0 > 0) std::fill(dst, dst + j0, T(0));
            if (j1 > j0) std::copy(src_row + j0 + dj - pad, src_row + j1 + dj - pad, dst + j0);
            if (j1 < OW) std::fill(dst + std::max(j0, j1), dst + OW, T(0));
          } else {
            for (long j = 0; j < OW; ++j) {
              const long src_j = j * stride + dj - pad;
              dst[j] = (src_j >= 0 && src_j < W) ? src_row[src_j] : T(0);
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add the column block back into the image.
template <typename T>
void col2im_add(const T* cols, long C, long H, long W, long k, long stride, long pad, long OH,
                long OW, T* img, long row_pitch = -1) {
  const long P = OH * OW;
  if (row_pitch < 0) row_pitch = P;
  for (long c = 0; c < C; ++c) {
    T* plane = img + c * H * W;
    for (long di = 0; di < k; ++di) {
      for (long dj = 0; dj < k; ++dj) {
        const T* row = cols + ((c * k + di) * k + dj) * row_pitch;
        for (long i = 0; i < OH; ++i) {
          const long dst_i = i * stride + di - pad;
          if (dst_i < 0 || dst_i >= H) continue;
          T* dst_row = plane + dst_i * W;
          const T* src = row + i * OW;
          for (long j = 0; j < OW; ++j) {
            const long dst_j = j * stride + dj - pad;
            if (dst_j >= 0 && dst_j < W) dst_row[dst_j] += src[j];
          }
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise / arithmetic
// ---------------------------------------------------------------------------

template <typename T>
VarT<T> add(const VarT<T>& a, const VarT<T>& b) {
  detail::check(a.value().same_shape(b.value()), "add: shape mismatch");
  TensorT<T> out = a.value();
  out.arr() += b.value().arr();
  return make_op<T>(std::move(out), {a, b}, [](NodeT<T>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad().arr() += n.grad.arr();
    if (n.parents[1]->requires_grad) n.parents[1]->ensure_grad().arr() += n.grad.arr();
  });
}

template <typename T>
VarT<T> sub(const VarT<T>& a, const VarT<T>& b) {
  detail::check(a.value().same_shape(b.value()), "sub: shape mismatch");
  TensorT<T> out = a.value();
  out.arr() -= b.value().arr();
  return make_op<T>(std::move(out), {a, b}, [](NodeT<T>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad().arr() += n.grad.arr();
    if (n.parents[1]->requires_grad) n.parents[1]->ensure_grad().arr() -= n.grad.arr();
  });
}

template <typename T>
VarT<T> mul(const VarT<T>& a, const VarT<T>& b) {
  detail::check(a.value().same_shape(b.value()), "mul: shape mismatch");
  TensorT<T> out = a.value();
  out.arr() *= b.value().arr();
  return make_op<T>(std::move(out), {a, b}, [](NodeT<T>& n) {
    const auto& av = n.parents[0]->value;
    const auto& bv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad().arr() += n.grad.arr() * bv.arr();
    if (n.parents[1]->requires_grad) n.parents[1]->ensure_grad().arr() += n.grad.arr() * av.arr();
  });
}

template <typename T>
VarT<T> scale(const VarT<T>& a, T c) {
  TensorT<T> out = a.value();
  out.arr() *= c;
  return make_op<T>(std::move(out), {a}, [c](NodeT<T>& n) {
    n.parents[0]->ensure_grad().arr() += c * n.grad.arr();
  });
}

template <typename T>
VarT<T> neg(const VarT<T>& a) {
  return scale(a, T(-1));
}

template <typename T>
VarT<T> add_scalar(const VarT<T>& a, T c) {
  TensorT<T> out = a.value();
  out.arr() += c;
  return make_op<T>(std::move(out), {a},
                    [](NodeT<T>& n) { n.parents[0]->ensure_grad().arr() += n.grad.arr(); });
}

// Elementwise product with a constant tensor (masks, done flags).
template <typename T>
VarT<T> mul_const(const VarT<T>& a, TensorT<T> m) {
  detail::check(a.value().same_shape(m), "mul_const: shape mismatch");
  TensorT<T> out = a.value();
  out.arr() *= m.arr();
  return make_op<T>(std::move(out), {a}, [m = std::move(m)](NodeT<T>& n) {
    n.parents[0]->ensure_grad().arr() += n.grad.arr() * m.arr();
  });
}

template <typename T>
VarT<T> relu(const VarT<T>& a) {
  TensorT<T> out = a.value();
  out.arr() = out.arr().max(T(0));
  return make_op<T>(std::move(out), {a}, [](NodeT<T>& n) {
    const auto& av = n.parents[0]->value;
    auto& g = n.parents[0]->ensure_grad();
    for (long i = 0; i < g.size(); ++i)
      if (av[i] > T(0)) g[i] += n.grad[i];
  });
}

template <typename T>
VarT<T> tanh_op(const VarT<T>& a) {
  TensorT<T> out = a.value();
  out.arr() = out.arr().tanh();
  return make_op<T>(std::move(out), {a}, [](NodeT<T>& n) {
    n.parents[0]->ensure_grad().arr() += n.grad.arr() * (T(1) - n.value.arr().square());
  });
}

template <typename T>
VarT<T> exp_op(const VarT<T>& a) {
  TensorT<T> out = a.value();
  out.arr() = out.arr().exp();
  return make_op<T>(std::move(out), {a}, [](NodeT<T>& n) {
    n.parents[0]->ensure_grad().arr() += n.grad.arr() * n.value.arr();
  });
}

template <typename T>
VarT<T> log_op(const VarT<T>& a) {
  TensorT<T> out = a.value();
  out.arr() = out.arr().log();
  return make_op<T>(std::move(out), {a}, [](NodeT<T>& n) {
    n.parents[0]->ensure_grad().arr() += n.grad.arr() / n.parents[0]->value.arr();
  });
}

template <typename T>
VarT<T> square(const VarT<T>& a) {
  TensorT<T> out = a.value();
  out.arr() = out.arr().square();
  return make_op<T>(std::move(out), {a}, [](NodeT<T>& n) {
    n.parents[0]->ensure_grad().arr() += T(2) * n.grad.arr() * n.parents[0]->value.arr();
  });
}

// Elementwise minimum; ties route the gradient to `a`.
template <typename T>
VarT<T> min_elem(const VarT<T>& a, const VarT<T>& b) {
  detail::check(a.value().same_shape(b.value()), "min_elem: shape mismatch");
  TensorT<T> out = a.value();
  out.arr() = out.arr().min(b.value().arr());
  return make_op<T>(std::move(out), {a, b}, [](NodeT<T>& n) {
    const auto& av = n.parents[0]->value;
    const auto& bv = n.parents[1]->value;
    for (long i = 0; i < n.grad.size(); ++i) {
      if (av[i] <= bv[i]) {
        if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad()[i] += n.grad[i];
      } else {
        if (n.parents[1]->requires_grad) n.parents[1]->ensure_grad()[i] += n.grad[i];
      }
    }
  });
}

template <typename T>
VarT<T> view(const VarT<T>& a, std::vector<long> shape) {
  TensorT<T> out = a.value().reshaped(std::move(shape));
  return make_op<T>(std::move(out), {a},
                    [](NodeT<T>& n) { n.parents[0]->ensure_grad().arr() += n.grad.arr(); });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
VarT<T> sum_all(const VarT<T>& a) {
  TensorT<T> out = TensorT<T>::scalar(a.value().arr().sum());
  return make_op<T>(std::move(out), {a}, [](NodeT<T>& n) {
    n.parents[0]->ensure_grad().arr() += n.grad[0];
  });
}

template <typename T>
VarT<T> mean_all(const VarT<T>& a) {
  detail::check(a.value().size() > 0, "mean_all: empty tensor");
  const T inv = T(1) / static_cast<T>(a.value().size());
  TensorT<T> out = TensorT<T>::scalar(a.value().arr().sum() * inv);
  return make_op<T>(std::move(out), {a}, [inv](NodeT<T>& n) {
    n.parents[0]->ensure_grad().arr() += n.grad[0] * inv;
  });
}

// (R x C) -> (R x 1), summing each row.
template <typename T>
VarT<T> row_sum(const VarT<T>& a) {
  const long R = a.value().rows(), C = a.value().cols();
  TensorT<T> out({R, 1});
  out.mat(R, 1) = a.value().mat(R, C).rowwise().sum();
  return make_op<T>(std::move(out), {a}, [R, C](NodeT<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (long r = 0; r < R; ++r) g.mat(R, C).row(r).array() += n.grad[r];
  });
}

// (R x C) -> (1 x C), mean over rows.
template <typename T>
VarT<T> col_mean(const VarT<T>& a) {
  const long R = a.value().rows(), C = a.value().cols();
  detail::check(R > 0, "col_mean: empty tensor");
  TensorT<T> out({1, C});
  out.mat(1, C) = a.value().mat(R, C).colwise().mean();
  return make_op<T>(std::move(out), {a}, [R, C](NodeT<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    const T inv = T(1) / static_cast<T>(R);
    g.mat(R, C).array().rowwise() += n.grad.mat(1, C).row(0).array() * inv;
  });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T>
VarT<T> matmul(const VarT<T>& a, const VarT<T>& b, bool trans_a = false, bool trans_b = false) {
  const long ar = a.value().rows(), ac = a.value().cols();
  const long br = b.value().rows(), bc = b.value().cols();
  const long M = trans_a ? ac : ar, K = trans_a ? ar : ac;
  const long Kb = trans_b ? bc : br, N = trans_b ? br : bc;
  detail::check(K == Kb, "matmul: inner dimension mismatch");
  TensorT<T> out = TensorT<T>::uninit({M, N});
  {
    auto A = a.value().mat(ar, ac);
    auto B = b.value().mat(br, bc);
    auto C = out.mat(M, N);
    if (!trans_a && !trans_b) C.noalias() = A * B;
    else if (trans_a && !trans_b) C.noalias() = A.transpose() * B;
    else if (!trans_a && trans_b) C.noalias() = A * B.transpose();
    else C.noalias() = A.transpose() * B.transpose();
  }
  return make_op<T>(std::move(out), {a, b},
                    [ar, ac, br, bc, M, N, trans_a, trans_b](NodeT<T>& n) {
    auto G = n.grad.mat(M, N);
    auto A = n.parents[0]->value.mat(ar, ac);
    auto B = n.parents[1]->value.mat(br, bc);
    if (n.parents[0]->requires_grad) {
      auto dA = n.parents[0]->ensure_grad().mat(ar, ac);
      if (!trans_a && !trans_b) dA.noalias() += G * B.transpose();
      else if (trans_a && !trans_b) dA.noalias() += B * G.transpose();
      else if (!trans_a && trans_b) dA.noalias() += G * B;
      else dA.noalias() += B.transpose() * G.transpose();
    }
    if (n.parents[1]->requires_grad) {
      auto dB = n.parents[1]->ensure_grad().mat(br, bc);
      if (!trans_a && !trans_b) dB.noalias() += A.transpose() * G;
      else if (trans_a && !trans_b) dB.noalias() += A * G;
      else if (!trans_a && trans_b) dB.noalias() += G.transpose() * A;
      else dB.noalias() += G.transpose() * A.transpose();
    }
  });
}

// Adds a (1 x C) row vector to every row of (R x C).
template <typename T>
VarT<T> add_rowvec(const VarT<T>& a, const VarT<T>& b) {
  const long R = a.value().rows(), C = a.value().cols();
  detail::check(b.value().size() == C, "add_rowvec: width mismatch");
  TensorT<T> out = a.value();
  out.mat(R, C).array().rowwise() +=
      b.value().mat(1, C).row(0).array();
  return make_op<T>(std::move(out), {a, b}, [R, C](NodeT<T>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad().arr() += n.grad.arr();
    if (n.parents[1]->requires_grad) {
      auto db = n.parents[1]->ensure_grad().mat(1, C);
      db.row(0) += n.grad.mat(R, C).colwise().sum();
    }
  });
}

template <typename T>
VarT<T> concat_cols(const VarT<T>& a, const VarT<T>& b) {
  const long R = a.value().rows(), Ca = a.value().cols(), Cb = b.value().cols();
  detail::check(b.value().rows() == R, "concat_cols: row mismatch");
  TensorT<T> out({R, Ca + Cb});
  out.mat(R, Ca + Cb).leftCols(Ca) = a.value().mat(R, Ca);
  out.mat(R, Ca + Cb).rightCols(Cb) = b.value().mat(R, Cb);
  return make_op<T>(std::move(out), {a, b}, [R, Ca, Cb](NodeT<T>& n) {
    auto G = n.grad.mat(R, Ca + Cb);
    if (n.parents[0]->requires_grad)
      n.parents[0]->ensure_grad().mat(R, Ca) += G.leftCols(Ca);
    if (n.parents[1]->requires_grad)
      n.parents[1]->ensure_grad().mat(R, Cb) += G.rightCols(Cb);
  });
}

template <typename T>
VarT<T> slice_cols(const VarT<T>& a, long c0, long c1) {
  const long R = a.value().rows(), C = a.value().cols();
  detail::check(0 <= c0 && c0 < c1 && c1 <= C, "slice_cols: bad range");
  TensorT<T> out({R, c1 - c0});
  out.mat(R, c1 - c0) = a.value().mat(R, C).middleCols(c0, c1 - c0);
  return make_op<T>(std::move(out), {a}, [R, C, c0, c1](NodeT<T>& n) {
    n.parents[0]->ensure_grad().mat(R, C).middleCols(c0, c1 - c0) += n.grad.mat(R, c1 - c0);
  });
}

// Row-wise L2 normalization; undefined (throws) on a zero-norm row.
template <typename T>
VarT<T> l2_normalize_rows(const VarT<T>& a) {
  const long R = a.value().rows(), C = a.value().cols();
  TensorT<T> out({R, C});
  TensorT<T> norms({R});
  for (long r = 0; r < R; ++r) {
    const T nrm = a.value().mat(R, C).row(r).norm();
    if (!(nrm > T(0))) throw std::invalid_argument("l2_normalize_rows: zero-norm row");
    norms[r] = nrm;
    out.mat(R, C).row(r) = a.value().mat(R, C).row(r) / nrm;
  }
  return make_op<T>(std::move(out), {a}, [R, C, norms](NodeT<T>& n) {
    auto dX = n.parents[0]->ensure_grad().mat(R, C);
    auto G = n.grad.mat(R, C);
    auto Y = n.value.mat(R, C);
    for (long r = 0; r < R; ++r) {
      const T dot = G.row(r).dot(Y.row(r));
      dX.row(r) += (G.row(r) - dot * Y.row(r)) / norms[r];
    }
  });
}

// ---------------------------------------------------------------------------
// Softmax family
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> softmax_rows_value(const TensorT<T>& x) {
  const long R = x.rows(), C = x.cols();
  TensorT<T> y({R, C});
  for (long r = 0; r < R; ++r) {
    const T m = x.mat(R, C).row(r).maxCoeff();
    y.mat(R, C).row(r) = (x.mat(R, C).row(r).array() - m).exp();
    y.mat(R, C).row(r) /= y.mat(R, C).row(r).sum();
  }
  return y;
}

template <typename T>
VarT<T> softmax_rows(const VarT<T>& a) {
  const long R = a.value().rows(), C = a.value().cols();
  TensorT<T> y = softmax_rows_value(a.value());
  return make_op<T>(std::move(y), {a}, [R, C](NodeT<T>& n) {
    auto dX = n.parents[0]->ensure_grad().mat(R, C);
    auto G = n.grad.mat(R, C);
    auto Y = n.value.mat(R, C);
    for (long r = 0; r < R; ++r) {
      const T dot = G.row(r).dot(Y.row(r));
      dX.row(r) += Y.row(r).cwiseProduct(G.row(r).array().matrix() -
                                         Eigen::Matrix<T, 1, Eigen::Dynamic>::Constant(C, dot));
    }
  });
}

template <typename T>
VarT<T> log_softmax_rows(const VarT<T>& a) {
  const long R = a.value().rows(), C = a.value().cols();
  TensorT<T> y({R, C});
  for (long r = 0; r < R; ++r) {
    const T m = a.value().mat(R, C).row(r).maxCoeff();
    const T lse = m + std::log((a.value().mat(R, C).row(r).array() - m).exp().sum());
    y.mat(R, C).row(r) = a.value().mat(R, C).row(r).array() - lse;
  }
  return make_op<T>(std::move(y), {a}, [R, C](NodeT<T>& n) {
    TensorT<T> sm = softmax_rows_value(n.parents[0]->value);
    auto dX = n.parents[0]->ensure_grad().mat(R, C);
    auto G = n.grad.mat(R, C);
    for (long r = 0; r < R; ++r) {
      const T gs = G.row(r).sum();
      dX.row(r) += G.row(r) - gs * sm.mat(R, C).row(r);
    }
  });
}

// Mean cross-entropy of row-wise logits against integer labels.
template <typename T>
VarT<T> cross_entropy_rows(const VarT<T>& logits, const std::vector<long>& labels) {
  const long R = logits.value().rows(), C = logits.value().cols();
  detail::check(static_cast<long>(labels.size()) == R, "cross_entropy: label count mismatch");
  for (long l : labels) detail::check(l >= 0 && l < C, "cross_entropy: label out of range");
  TensorT<T> sm = softmax_rows_value(logits.value());
  T loss = T(0);
  for (long r = 0; r < R; ++r) loss -= std::log(std::max(sm.at2(r, labels[r]), T(1e-30)));
  loss /= static_cast<T>(R);
  return make_op<T>(TensorT<T>::scalar(loss), {logits}, [R, C, sm, labels](NodeT<T>& n) {
    auto dX = n.parents[0]->ensure_grad().mat(R, C);
    const T g = n.grad[0] / static_cast<T>(R);
    for (long r = 0; r < R; ++r) {
      dX.row(r) += g * sm.mat(R, C).row(r);
      dX(r, labels[r]) -= g;
    }
  });
}

// Mean binary cross-entropy per logit against 0/1 targets (numerically stable).
template <typename T>
VarT<T> bce_with_logits(const VarT<T>& logits, const std::vector<T>& targets) {
  const long N = logits.value().size();
  detail::check(static_cast<long>(targets.size()) == N, "bce: target count mismatch");
  T loss = T(0);
  for (long i = 0; i < N; ++i) {
    const T l = logits.value()[i], y = targets[i];
    loss += std::max(l, T(0)) - l * y + std::log1p(std::exp(-std::abs(l)));
  }
  loss /= static_cast<T>(N);
  return make_op<T>(TensorT<T>::scalar(loss), {logits}, [N, targets](NodeT<T>& n) {
    const auto& lv = n.parents[0]->value;
    auto& dX = n.parents[0]->ensure_grad();
    const T g = n.grad[0] / static_cast<T>(N);
    for (long i = 0; i < N; ++i) {
      const T sig = T(1) / (T(1) + std::exp(-lv[i]));
      dX[i] += g * (sig - targets[i]);
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution (valid padding unless pad > 0); per-image im2col + GEMM.
// ---------------------------------------------------------------------------

namespace detail {

// Images per GEMM chunk so the im2col matrix stays under ~64 MB; batching
// images into one GEMM is what keeps the skinny conv shapes fast.
inline long conv_chunk(long B, long CKK, long P, size_t scalar_size) {
  const long budget = static_cast<long>((64ull << 20) / scalar_size);
  return std::max<long>(1, std::min(B, budget / std::max<long>(1, CKK * P)));
}

// Reused conv scratch; fresh multi-MB allocations per call cost more in page
// faults than the GEMMs they feed.
template <typename T>
T* conv_scratch(int slot, long n) {
  thread_local std::array<std::vector<T, AlignedAlloc<T>>, 4> bufs;
  auto& buf = bufs[static_cast<size_t>(slot)];
  if (static_cast<long>(buf.size()) < n) buf.resize(static_cast<size_t>(n));
  return buf.data();
}

}  // namespace detail

template <typename T>
VarT<T> conv2d(const VarT<T>& x, const VarT<T>& w, const VarT<T>& b, long stride, long pad = 0) {
  const auto& xs = x.value().shape();
  const auto& ws = w.value().shape();
  detail::check(xs.size() == 4, "conv2d: input must be (B,C,H,W)");
  detail::check(ws.size() == 4, "conv2d: weight must be (F,C,k,k)");
  const long B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const long F = ws[0], k = ws[2];
  detail::check(ws[1] == C && ws[3] == k, "conv2d: weight/input channel or kernel mismatch");
  detail::check(b.value().size() == F, "conv2d: bias size mismatch");
  const long OH = (H + 2 * pad - k) / stride + 1;
  const long OW = (W + 2 * pad - k) / stride + 1;
  detail::check(OH > 0 && OW > 0, "conv2d: kernel larger than padded input");
  const long P = OH * OW, CKK = C * k * k;
  const long chunk = detail::conv_chunk(B, CKK, P, sizeof(T));
  using Map = typename TensorT<T>::template MatMap<T>;

  TensorT<T> y = TensorT<T>::uninit({B, F, OH, OW});
  {
    T* cols = detail::conv_scratch<T>(0, CKK * chunk * P);
    T* ych = detail::conv_scratch<T>(1, F * chunk * P);
    for (long b0 = 0; b0 < B; b0 += chunk) {
      const long nb = std::min(chunk, B - b0);
      for (long bi = 0; bi < nb; ++bi)
        detail::im2col(x.value().data() + (b0 + bi) * C * H * W, C, H, W, k, stride, pad, OH, OW,
                       cols + bi * P, nb * P);
      auto Y = Map(ych, F, nb * P);
      Y.noalias() = w.value().mat(F, CKK) * Map(cols, CKK, nb * P);
      Y.colwise() += b.value().mat(F, 1).col(0);
      // scatter (F, nb*P) column blocks back into batch-major layout
      for (long bi = 0; bi < nb; ++bi)
        for (long f = 0; f < F; ++f)
          std::copy(ych + f * nb * P + bi * P, ych + f * nb * P + bi * P + P,
                    y.data() + ((b0 + bi) * F + f) * P);
    }
  }
  return make_op<T>(std::move(y), {x, w, b},
                    [B, C, H, W, F, k, stride, pad, OH, OW, P, CKK, chunk](NodeT<T>& n) {
    const TensorT<T>& xv = n.parents[0]->value;
    const TensorT<T>& wv = n.parents[1]->value;
    const bool need_dx = n.parents[0]->requires_grad;
    const bool need_dw = n.parents[1]->requires_grad;
    const bool need_db = n.parents[2]->requires_grad;
    using BwdMap = typename TensorT<T>::template MatMap<T>;
    T* cols = detail::conv_scratch<T>(0, CKK * chunk * P);
    T* gmat = detail::conv_scratch<T>(2, F * chunk * P);
    T* dcols = detail::conv_scratch<T>(3, CKK * chunk * P);
    for (long b0 = 0; b0 < B; b0 += chunk) {
      const long nb = std::min(chunk, B - b0);
      for (long bi = 0; bi < nb; ++bi)
        for (long f = 0; f < F; ++f)
          std::copy(n.grad.data() + ((b0 + bi) * F + f) * P,
                    n.grad.data() + ((b0 + bi) * F + f) * P + P, gmat + f * nb * P + bi * P);
      auto G = BwdMap(gmat, F, nb * P);
      if (need_dw || need_dx)
        for (long bi = 0; bi < nb; ++bi)
          detail::im2col(xv.data() + (b0 + bi) * C * H * W, C, H, W, k, stride, pad, OH, OW,
                         cols + bi * P, nb * P);
      if (need_dw)
        n.parents[1]->ensure_grad().mat(F, CKK).noalias() +=
            G * BwdMap(cols, CKK, nb * P).transpose();
      if (need_db) n.parents[2]->ensure_grad().mat(F, 1).col(0) += G.rowwise().sum();
      if (need_dx) {
        auto D = BwdMap(dcols, CKK, nb * P);
        D.noalias() = wv.mat(F, CKK).transpose() * G;
        for (long bi = 0; bi < nb; ++bi)
          detail::col2im_add(dcols + bi * P, C, H, W, k, stride, pad, OH, OW,
                             n.parents[0]->ensure_grad().data() + (b0 + bi) * C * H * W, nb * P);
      }
    }
  });
}

// Transposed convolution; OH = (H-1)*stride + k + out_pad.
template <typename T>
VarT<T> conv2d_transpose(const VarT<T>& x, const VarT<T>& w, const VarT<T>& b, long stride,
                         long out_pad = 0) {
  const auto& xs = x.value().shape();
  const auto& ws = w.value().shape();
  detail::check(xs.size() == 4, "conv2d_transpose: input must be (B,Ci,H,W)");
  detail::check(ws.size() == 4, "conv2d_transpose: weight must be (Ci,Co,k,k)");
  const long B = xs[0], Ci = xs[1], H = xs[2], W = xs[3];
  const long Co = ws[1], k = ws[2];
  detail::check(ws[0] == Ci && ws[3] == k, "conv2d_transpose: weight/input mismatch");
  detail::check(b.value().size() == Co, "conv2d_transpose: bias size mismatch");
  detail::check(out_pad >= 0 && out_pad < stride + 1, "conv2d_transpose: bad out_pad");
  const long OH = (H - 1) * stride + k + out_pad;
  const long OW = (W - 1) * stride + k + out_pad;
  const long P = H * W, CoKK = Co * k * k;

  TensorT<T> y({B, Co, OH, OW});
  TensorT<T> cols({CoKK, P});
  for (long bi = 0; bi < B; ++bi) {
    auto X = typename TensorT<T>::template ConstMatMap<T>(x.value().data() + bi * Ci * P, Ci, P);
    cols.mat(CoKK, P).noalias() = w.value().mat(Ci, CoKK).transpose() * X;
    T* out_img = y.data() + bi * Co * OH * OW;
    detail::col2im_add(cols.data(), Co, OH, OW, k, stride, 0, H, W, out_img);
    for (long c = 0; c < Co; ++c) {
      typename TensorT<T>::template ArrMap<T>(out_img + c * OH * OW, OH * OW) += b.value()[c];
    }
  }
  return make_op<T>(std::move(y), {x, w, b},
                    [B, Ci, Co, H, W, k, stride, OH, OW, P, CoKK](NodeT<T>& n) {
    const TensorT<T>& xv = n.parents[0]->value;
    const TensorT<T>& wv = n.parents[1]->value;
    TensorT<T> dcols({CoKK, P});
    const bool need_dx = n.parents[0]->requires_grad;
    const bool need_dw = n.parents[1]->requires_grad;
    const bool need_db = n.parents[2]->requires_grad;
    for (long bi = 0; bi < B; ++bi) {
      const T* gimg = n.grad.data() + bi * Co * OH * OW;
      if (need_dx || need_dw)
        detail::im2col(gimg, Co, OH, OW, k, stride, 0, H, W, dcols.data());
      if (need_dx) {
        auto dX = typename TensorT<T>::template MatMap<T>(
            n.parents[0]->ensure_grad().data() + bi * Ci * P, Ci, P);
        dX.noalias() += wv.mat(Ci, CoKK) * dcols.mat(CoKK, P);
      }
      if (need_dw) {
        auto X = typename TensorT<T>::template ConstMatMap<T>(xv.data() + bi * Ci * P, Ci, P);
        n.parents[1]->ensure_grad().mat(Ci, CoKK).noalias() += X * dcols.mat(CoKK, P).transpose();
      }
      if (need_db) {
        auto& db = n.parents[2]->ensure_grad();
        for (long c = 0; c < Co; ++c)
          db[c] += typename TensorT<T>::template ConstArrMap<T>(gimg + c * OH * OW, OH * OW).sum();
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Layer normalization over each row, with affine parameters.
// ---------------------------------------------------------------------------

template <typename T>
VarT<T> layer_norm_rows(const VarT<T>& x, const VarT<T>& gamma, const VarT<T>& beta,
                        T eps = T(1e-5)) {
  const long R = x.value().rows(), C = x.value().cols();
  detail::check(gamma.value().size() == C && beta.value().size() == C,
                "layer_norm: affine size mismatch");
  TensorT<T> xhat({R, C});
  TensorT<T> inv_std({R});
  for (long r = 0; r < R; ++r) {
    auto row = x.value().mat(R, C).row(r);
    const T mu = row.mean();
    const T var = (row.array() - mu).square().mean();
    inv_std[r] = T(1) / std::sqrt(var + eps);
    xhat.mat(R, C).row(r) = (row.array() - mu) * inv_std[r];
  }
  TensorT<T> y({R, C});
  y.mat(R, C) = xhat.mat(R, C);
  y.mat(R, C).array().rowwise() *= gamma.value().mat(1, C).row(0).array();
  y.mat(R, C).array().rowwise() += beta.value().mat(1, C).row(0).array();
  return make_op<T>(std::move(y), {x, gamma, beta},
                    [R, C, xhat, inv_std](NodeT<T>& n) {
    const TensorT<T>& gv = n.parents[1]->value;
    auto G = n.grad.mat(R, C);
    auto Xh = xhat.mat(R, C);
    if (n.parents[1]->requires_grad) {
      auto dgamma = n.parents[1]->ensure_grad().mat(1, C);
      dgamma.row(0) += G.cwiseProduct(Xh).colwise().sum();
    }
    if (n.parents[2]->requires_grad) {
      auto dbeta = n.parents[2]->ensure_grad().mat(1, C);
      dbeta.row(0) += G.colwise().sum();
    }
    if (n.parents[0]->requires_grad) {
      auto dX = n.parents[0]->ensure_grad().mat(R, C);
      for (long r = 0; r < R; ++r) {
        Eigen::Array<T, 1, Eigen::Dynamic> dxh =
            G.row(r).array() * gv.mat(1, C).row(0).array();
        const T m1 = dxh.mean();
        const T m2 = (dxh * Xh.row(r).array()).mean();
        dX.row(r).array() += inv_std[r] * (dxh - m1 - Xh.row(r).array() * m2);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Composites
// ---------------------------------------------------------------------------

template <typename T>
VarT<T> mse(const VarT<T>& a, const VarT<T>& b) {
  return mean_all(square(sub(a, b)));
}

template <typename T>
VarT<T> mse_const(const VarT<T>& a, const TensorT<T>& target) {
  return mse(a, VarT<T>::constant(target));
}

template <typename T>
VarT<T> sum_of_squares(const std::vector<VarT<T>>& vars) {
  VarT<T> total = VarT<T>::scalar(T(0));
  for (const auto& v : vars) total = add(total, sum_all(square(v)));
  return total;
}

template <typename T>
bool all_finite(const TensorT<T>& t) {
  for (long i = 0; i < t.size(); ++i)
    if (!std::isfinite(static_cast<double>(t[i]))) return false;
  return true;
}

}  // namespace jointrl
