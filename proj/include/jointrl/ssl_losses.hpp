#pragma once

#include "jointrl/ops.hpp"

namespace jointrl::ssl {

enum class InfoNceMode { bilinear, dot_temperature };

// Contrastive loss over matched rows: row i of q is positive with row i of
// keys, every other row is a negative. bilinear scores are q W k^T; the
// dot_temperature form scores q.k / tau. Keys are expected detached.
template <typename T>
VarT<T> info_nce(const VarT<T>& q, const VarT<T>& keys, InfoNceMode mode, const VarT<T>& W,
                 T tau) {
  const long N = q.value().rows();
  if (N < 2) throw std::invalid_argument("info_nce: need at least 2 rows for negatives");
  if (keys.value().rows() != N || keys.value().cols() != q.value().cols())
    throw std::invalid_argument("info_nce: q/keys shape mismatch");
  VarT<T> logits;
  if (mode == InfoNceMode::bilinear) {
    if (W.value().rows() != q.value().cols() || W.value().cols() != q.value().cols())
      throw std::invalid_argument("info_nce: W must be (dim x dim)");
    logits = matmul(matmul(q, W), keys, false, true);
  } else {
    if (!(tau > T(0))) throw std::invalid_argument("info_nce: temperature must be > 0");
    logits = scale(matmul(q, keys, false, true), T(1) / tau);
  }
  std::vector<long> labels(static_cast<size_t>(N));
  for (long i = 0; i < N; ++i) labels[static_cast<size_t>(i)] = i;
  return cross_entropy_rows(logits, labels);
}

template <typename T>
VarT<T> info_nce(const VarT<T>& q, const VarT<T>& keys, T tau) {
  return info_nce(q, keys, InfoNceMode::dot_temperature, VarT<T>(), tau);
}

// Mean over rows of || n(p) - n(z) ||^2 = 2 - 2 cos(p, z); z detached upstream.
template <typename T>
VarT<T> byol_term(const VarT<T>& p, const VarT<T>& z) {
  return mean_all(row_sum(square(sub(l2_normalize_rows(p), l2_normalize_rows(z)))));
}

// (term(p1, z2) + term(p1', z2')) / 2 over the two prediction/target pairs.
template <typename T>
VarT<T> byol_loss(const VarT<T>& p1, const VarT<T>& z2, const VarT<T>& p1_next,
                  const VarT<T>& z2_next) {
  return scale(add(byol_term(p1, z2), byol_term(p1_next, z2_next)), T(0.5));
}

// Mean of -cos(h, z') and -cos(h', z); z, z' detached upstream.
template <typename T>
VarT<T> simsiam_loss(const VarT<T>& h, const VarT<T>& h_other, const VarT<T>& z,
                     const VarT<T>& z_other) {
  VarT<T> c1 = mean_all(row_sum(mul(l2_normalize_rows(h), l2_normalize_rows(z_other))));
  VarT<T> c2 = mean_all(row_sum(mul(l2_normalize_rows(h_other), l2_normalize_rows(z))));
  return scale(add(c1, c2), T(-0.5));
}

template <typename T>
struct DinoResult {
  VarT<T> loss;
  TensorT<T> new_center;
};

// Cross-entropy of the student distribution against the centered, sharpened
// teacher distribution; teacher rows detached upstream. Returns the EMA'd
// center computed from the teacher outputs of both views.
template <typename T>
VarT<T> dino_pair_loss(const VarT<T>& student, const VarT<T>& teacher, const TensorT<T>& center,
                       T tau_student, T tau_teacher) {
  const long R = teacher.value().rows(), K = teacher.value().cols();
  if (center.size() != K) throw std::invalid_argument("dino: center dimension mismatch");
  if (student.value().rows() != R || student.value().cols() != K)
    throw std::invalid_argument("dino: student/teacher shape mismatch");
  TensorT<T> centered({R, K});
  for (long r = 0; r < R; ++r)
    for (long k = 0; k < K; ++k)
      centered.at2(r, k) = (teacher.value().at2(r, k) - center[k]) / tau_teacher;
  TensorT<T> p_teacher = softmax_rows_value(centered);
  VarT<T> log_p_student = log_softmax_rows(scale(student, T(1) / tau_student));
  return neg(mean_all(row_sum(mul_const(log_p_student, p_teacher))));
}

template <typename T>
DinoResult<T> dino_loss(const VarT<T>& student1, const VarT<T>& teacher1, const VarT<T>& student2,
                        const VarT<T>& teacher2, const TensorT<T>& center, T tau_student,
                        T tau_teacher, T center_momentum) {
  DinoResult<T> out;
  out.loss = scale(add(dino_pair_loss(student1, teacher1, center, tau_student, tau_teacher),
                       dino_pair_loss(student2, teacher2, center, tau_student, tau_teacher)),
                   T(0.5));
  const long K = center.size();
  TensorT<T> mean_teacher({1, K});
  const long R1 = teacher1.value().rows(), R2 = teacher2.value().rows();
  for (long k = 0; k < K; ++k) {
    T acc = T(0);
    for (long r = 0; r < R1; ++r) acc += teacher1.value().at2(r, k);
    for (long r = 0; r < R2; ++r) acc += teacher2.value().at2(r, k);
    mean_teacher[k] = acc / static_cast<T>(R1 + R2);
  }
  out.new_center = TensorT<T>({1, K});
  for (long k = 0; k < K; ++k)
    out.new_center[k] = center_momentum * center[k] + (T(1) - center_momentum) * mean_teacher[k];
  return out;
}

// Regularized-autoencoder objective. Reconstruction and target are cropped to
// their common upper-left region before the MSE (the decoder output size need
// not match the view).
template <typename T>
VarT<T> rae_loss_terms(const VarT<T>& recon, const VarT<T>& target, const VarT<T>& latent,
                       const std::vector<VarT<T>>& decoder_weights, T lambda_latent,
                       T lambda_weights) {
  const auto& rs = recon.value().shape();
  const auto& ts = target.value().shape();
  if (rs.size() != 4 || ts.size() != 4 || rs[0] != ts[0] || rs[1] != ts[1])
    throw std::invalid_argument("rae: recon/target must be (B,C,H,W) with matching B,C");
  const long B = rs[0], C = rs[1];
  const long H = std::min(rs[2], ts[2]), W = std::min(rs[3], ts[3]);
  auto crop = [&](const VarT<T>& x, long XH, long XW) {
    if (XH == H && XW == W) return x;
    // upper-left crop via two column slices on reshaped views
    VarT<T> rows = slice_cols(view(x, {B * C, XH * XW}), 0, H * XW);
    VarT<T> cols = slice_cols(view(rows, {B * C * H, XW}), 0, W);
    return view(cols, {B, C, H, W});
  };
  VarT<T> rec_mse = mse(crop(recon, rs[2], rs[3]), crop(target, ts[2], ts[3]));
  VarT<T> latent_pen = scale(mean_all(row_sum(square(latent))), lambda_latent);
  VarT<T> weight_pen = scale(sum_of_squares(decoder_weights), lambda_weights);
  return add(add(rec_mse, latent_pen), weight_pen);
}

// MSE over masked pixels only: mask is 1 on masked-patch pixels, 0 elsewhere.
template <typename T>
VarT<T> masked_mse(const VarT<T>& recon, const VarT<T>& target, const TensorT<T>& mask) {
  T count = T(0);
  for (long i = 0; i < mask.size(); ++i) count += mask[i];
  if (!(count > T(0))) throw std::invalid_argument("masked_mse: empty mask");
  VarT<T> se = mul_const(square(sub(recon, target)), mask);
  return scale(sum_all(se), T(1) / count);
}

// Patch mask over a (side x side) image: exactly floor(ratio * patches)
// patches are masked, chosen uniformly per image.
struct PatchMask {
  std::vector<uint8_t> masked;  // one flag per patch, row-major
  int patches_per_side = 0;
  long masked_count = 0;
};

inline PatchMask make_patch_mask(int side, int patch_size, double ratio, RandomStream& rng) {
  if (side % patch_size != 0)
    throw std::invalid_argument("patch mask: image side not divisible by patch size");
  if (!(ratio > 0.0 && ratio < 1.0))
    throw std::invalid_argument("patch mask: mask_ratio must lie in (0,1)");
  PatchMask m;
  m.patches_per_side = side / patch_size;
  const long total = static_cast<long>(m.patches_per_side) * m.patches_per_side;
  m.masked_count = static_cast<long>(ratio * static_cast<double>(total));
  std::vector<long> order(static_cast<size_t>(total));
  for (long i = 0; i < total; ++i) order[static_cast<size_t>(i)] = i;
  // partial Fisher-Yates: first masked_count entries are the masked patches
  for (long i = 0; i < m.masked_count; ++i) {
    const long j = i + rng.randint(total - i);
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  m.masked.assign(static_cast<size_t>(total), 0);
  for (long i = 0; i < m.masked_count; ++i) m.masked[static_cast<size_t>(order[i])] = 1;
  return m;
}

template <typename T>
VarT<T> balanced_combine(const VarT<T>& loss_a, const VarT<T>& loss_b) {
  return scale(add(loss_a, loss_b), T(0.5));
}

}  // namespace jointrl::ssl
