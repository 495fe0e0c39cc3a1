#include "jointrl/augment.hpp"

#include <stdexcept>
#include <string>

namespace jointrl::aug {

namespace {

void copy_window(const uint8_t* src, int src_h, int src_w, int c, int top, int left, uint8_t* dst,
                 int dst_h, int dst_w) {
  for (int ch = 0; ch < c; ++ch) {
    const uint8_t* sp = src + static_cast<size_t>(ch) * src_h * src_w;
    uint8_t* dp = dst + static_cast<size_t>(ch) * dst_h * dst_w;
    for (int r = 0; r < dst_h; ++r)
      std::copy(sp + (top + r) * src_w + left, sp + (top + r) * src_w + left + dst_w,
                dp + r * dst_w);
  }
}

}  // namespace

void AugmentationSpec::validate() const {
  if (m <= 0 || out <= 0) throw std::invalid_argument("augment: sizes must be positive");
  if ((kind == AugKind::random_crop || kind == AugKind::random_translate) && m < out)
    throw std::invalid_argument("augment: magnitude m must be >= out size");
}

ImageBatch random_crop(const ImageBatch& batch, int out, RandomStream& rng) {
  if (batch.h != batch.w) throw std::invalid_argument("random_crop: images must be square");
  const int m = batch.h;
  if (m < out) throw std::invalid_argument("random_crop: source " + std::to_string(m) +
                                           " smaller than crop " + std::to_string(out));
  ImageBatch dst(batch.n, batch.c, out, out);
  const int span = m - out + 1;
  for (int i = 0; i < batch.n; ++i) {
    const int top = static_cast<int>(rng.randint(span));
    const int left = static_cast<int>(rng.randint(span));
    copy_window(batch.image(i), m, m, batch.c, top, left, dst.image(i), out, out);
  }
  return dst;
}

ImageBatch random_translate(const ImageBatch& batch, int m, int out, RandomStream& rng) {
  if (batch.h != batch.w) throw std::invalid_argument("random_translate: images must be square");
  const int h = batch.h;
  if (h > m)
    throw std::invalid_argument("random_translate: image " + std::to_string(h) +
                                " larger than canvas " + std::to_string(m));
  ImageBatch canvas(batch.n, batch.c, m, m);
  const int span = m - h + 1;
  for (int i = 0; i < batch.n; ++i) {
    const int top = static_cast<int>(rng.randint(span));
    const int left = static_cast<int>(rng.randint(span));
    const uint8_t* src = batch.image(i);
    uint8_t* dp = canvas.image(i);
    for (int ch = 0; ch < batch.c; ++ch)
      for (int r = 0; r < h; ++r)
        std::copy(src + (static_cast<size_t>(ch) * h + r) * h,
                  src + (static_cast<size_t>(ch) * h + r) * h + h,
                  dp + (static_cast<size_t>(ch) * m + top + r) * m + left);
  }
  return center_crop(canvas, out);
}

ImageBatch center_crop(const ImageBatch& batch, int out) {
  if (batch.h != batch.w) throw std::invalid_argument("center_crop: images must be square");
  const int m = batch.h;
  if (m < out) throw std::invalid_argument("center_crop: source smaller than crop");
  ImageBatch dst(batch.n, batch.c, out, out);
  const int off = (m - out) / 2;
  for (int i = 0; i < batch.n; ++i)
    copy_window(batch.image(i), m, m, batch.c, off, off, dst.image(i), out, out);
  return dst;
}

ImageBatch resize_to_magnitude(const ImageBatch& batch, int m) {
  if (batch.h != batch.w) throw std::invalid_argument("resize_to_magnitude: images must be square");
  const int src = batch.h;
  if (m == src) return batch;
  if (m < src) return center_crop(batch, m);
  // m > render size: symmetric zero pad keeps the searched range well-defined.
  ImageBatch dst(batch.n, batch.c, m, m);
  const int off = (m - src) / 2;
  for (int i = 0; i < batch.n; ++i) {
    const uint8_t* sp = batch.image(i);
    uint8_t* dp = dst.image(i);
    for (int ch = 0; ch < batch.c; ++ch)
      for (int r = 0; r < src; ++r)
        std::copy(sp + (static_cast<size_t>(ch) * src + r) * src,
                  sp + (static_cast<size_t>(ch) * src + r) * src + src,
                  dp + (static_cast<size_t>(ch) * m + off + r) * m + off);
  }
  return dst;
}

ImageBatch apply(const AugmentationSpec& spec, const ImageBatch& batch, RandomStream& rng) {
  spec.validate();
  switch (spec.kind) {
    case AugKind::random_crop:
      // skip the magnitude resize when it is a no-op; the copy is large
      if (spec.m == batch.h) return random_crop(batch, spec.out, rng);
      return random_crop(resize_to_magnitude(batch, spec.m), spec.out, rng);
    case AugKind::random_translate: {
      // Source is first brought to the crop size, then scattered on the canvas.
      ImageBatch base = batch.h > spec.out ? center_crop(batch, spec.out) : batch;
      return random_translate(base, spec.m, spec.out, rng);
    }
    case AugKind::center_crop:
      return center_crop(resize_to_magnitude(batch, spec.m), spec.out);
    case AugKind::none:
      return center_crop(batch, spec.out);
  }
  throw std::logic_error("augment: unreachable");
}

BranchViews make_branch_views(const ImageBatch& s, const ImageBatch& s_next,
                              const AugmentationSpec& spec1, const AugmentationSpec& spec2,
                              RandomStream& rng) {
  BranchViews v;
  v.s_a = apply(spec1, s, rng);
  v.s_a_next = apply(spec1, s_next, rng);
  v.s_p = apply(spec2, s, rng);
  v.s_p_next = apply(spec2, s_next, rng);
  return v;
}

}  // namespace jointrl::aug
