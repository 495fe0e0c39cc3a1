#pragma once

#include <cstdint>
#include <vector>

#include "jointrl/tensor.hpp"

namespace jointrl {

// Planar channel-major uint8 image, values in [0, 255].
struct Image {
  int h = 0, w = 0, c = 0;
  std::vector<uint8_t> data;

  Image() = default;
  Image(int h_, int w_, int c_, uint8_t fill = 0)
      : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, fill) {}

  uint8_t& at(int ch, int row, int col) {
    return data[(static_cast<size_t>(ch) * h + row) * w + col];
  }
  uint8_t at(int ch, int row, int col) const {
    return data[(static_cast<size_t>(ch) * h + row) * w + col];
  }
  size_t plane_size() const { return static_cast<size_t>(h) * w; }
  bool operator==(const Image& o) const {
    return h == o.h && w == o.w && c == o.c && data == o.data;
  }
};

// Contiguous batch of images, planar NCHW.
struct ImageBatch {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<uint8_t> data;

  ImageBatch() = default;
  ImageBatch(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<size_t>(n_) * c_ * h_ * w_, 0) {}

  size_t image_size() const { return static_cast<size_t>(c) * h * w; }
  uint8_t* image(int i) { return data.data() + static_cast<size_t>(i) * image_size(); }
  const uint8_t* image(int i) const { return data.data() + static_cast<size_t>(i) * image_size(); }
  void set_image(int i, const Image& img) {
    std::copy(img.data.begin(), img.data.end(), image(i));
  }
  Image get_image(int i) const {
    Image img(h, w, c);
    std::copy(image(i), image(i) + image_size(), img.data.begin());
    return img;
  }
};

// Pixel scaling to [0,1] happens here, exactly once, on the way into the
// encoder; augmentation stays in uint8 space.
inline Tensor to_float(const ImageBatch& b) {
  Tensor t = Tensor::uninit({b.n, b.c, b.h, b.w});
  Eigen::Map<Eigen::Array<float, Eigen::Dynamic, 1>>(t.data(), t.size()) =
      Eigen::Map<const Eigen::Array<uint8_t, Eigen::Dynamic, 1>>(b.data.data(),
                                                                 static_cast<long>(b.data.size()))
          .cast<float>() *
      (1.0f / 255.0f);
  return t;
}

}  // namespace jointrl
