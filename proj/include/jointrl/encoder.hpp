#pragma once

#include "jointrl/image.hpp"
#include "jointrl/nn.hpp"

namespace jointrl::agent {

enum class Backbone { plain, residual_tail };

struct EncoderConfig {
  int conv_layers = 4;
  int filters = 32;
  int fc_layers = 1;
  int repr_dim = 50;
  bool tanh_out = false;
  int extra_linear = 0;  // appended 128-wide ReLU linears
  Backbone backbone = Backbone::plain;
  std::vector<int> strides;  // per conv layer; empty -> first 2, rest 1
  int kernel = 3;
  int input_size = 84;
  int input_channels = 9;

  std::vector<int> resolved_strides() const;
  void validate() const;
  std::string describe() const;
};

// Convolutional pixel encoder: conv stack -> flatten -> fc -> layer norm
// (-> tanh). residual_tail swaps the last two convs for a residual block of
// the same depth and width.
template <typename T>
class PixelEncoderT {
 public:
  PixelEncoderT() = default;
  PixelEncoderT(const EncoderConfig& cfg, RandomStream& rng, bool trainable = true)
      : cfg_(cfg) {
    cfg_.validate();
    const auto strides = cfg_.resolved_strides();
    long ch = cfg_.input_channels;
    long size = cfg_.input_size;
    const int plain_layers =
        cfg_.backbone == Backbone::residual_tail ? cfg_.conv_layers - 2 : cfg_.conv_layers;
    for (int i = 0; i < plain_layers; ++i) {
      convs_.emplace_back(ch, cfg_.filters, cfg_.kernel, strides[static_cast<size_t>(i)], 0, rng);
      size = convs_.back().out_size(size);
      ch = cfg_.filters;
      if (size < 1) throw std::invalid_argument("encoder: conv stack exhausts the image");
    }
    if (cfg_.backbone == Backbone::residual_tail) {
      // padded stride-1 convs keep the spatial dims so the skip adds cleanly
      res1_ = Conv2dT<T>(ch, cfg_.filters, cfg_.kernel, 1, (cfg_.kernel - 1) / 2, rng);
      res2_ = Conv2dT<T>(cfg_.filters, cfg_.filters, cfg_.kernel, 1, (cfg_.kernel - 1) / 2, rng);
      ch = cfg_.filters;
    }
    final_spatial_ = size;
    conv_flat_ = ch * size * size;
    long cur = conv_flat_;
    for (int i = 0; i < cfg_.fc_layers; ++i) {
      const long out = cfg_.repr_dim;
      fcs_.emplace_back(cur, out, rng);
      cur = out;
    }
    norm_ = LayerNormT<T>(cur);
    for (int i = 0; i < cfg_.extra_linear; ++i) {
      extras_.emplace_back(cur, 128, rng);
      cur = 128;
    }
    out_dim_ = cur;
    if (!trainable) {
      NamedParams<T> named;
      collect(named, "");
      for (auto& [name, v] : named) v.node()->requires_grad = false;
    }
  }

  VarT<T> conv_features(const VarT<T>& x) const {
    check_input(x.value());
    VarT<T> h = x;
    for (const auto& conv : convs_) h = relu(conv.forward(h));
    if (cfg_.backbone == Backbone::residual_tail) {
      VarT<T> r = res2_.forward(relu(res1_.forward(h)));
      h = relu(add(h, r));
    }
    return view(h, {x.value().dim(0), conv_flat_});
  }

  // fc stack applied to flattened conv features; pre_tanh skips the optional
  // squash (the autoencoder latent penalty wants the pre-tanh value).
  VarT<T> head(const VarT<T>& feats, bool pre_tanh = false) const {
    VarT<T> h = feats;
    for (size_t i = 0; i < fcs_.size(); ++i) {
      h = fcs_[i].forward(h);
      if (i + 1 < fcs_.size()) h = relu(h);
    }
    h = norm_.forward(h);
    if (cfg_.tanh_out && !pre_tanh) h = tanh_op(h);
    for (const auto& extra : extras_) h = relu(extra.forward(h));
    return h;
  }

  VarT<T> forward(const VarT<T>& x, bool pre_tanh = false) const {
    return head(conv_features(x), pre_tanh);
  }

  void collect(NamedParams<T>& out, const std::string& prefix) const {
    for (size_t i = 0; i < convs_.size(); ++i)
      convs_[i].collect(out, prefix + ".conv" + std::to_string(i));
    if (cfg_.backbone == Backbone::residual_tail) {
      res1_.collect(out, prefix + ".res1");
      res2_.collect(out, prefix + ".res2");
    }
    for (size_t i = 0; i < fcs_.size(); ++i)
      fcs_[i].collect(out, prefix + ".fc" + std::to_string(i));
    norm_.collect(out, prefix + ".ln");
    for (size_t i = 0; i < extras_.size(); ++i)
      extras_[i].collect(out, prefix + ".extra" + std::to_string(i));
  }

  std::vector<VarT<T>> params() const {
    NamedParams<T> named;
    collect(named, "enc");
    return strip_names(named);
  }

  long out_dim() const { return out_dim_; }
  long conv_flat_dim() const { return conv_flat_; }
  long final_spatial() const { return final_spatial_; }
  const EncoderConfig& config() const { return cfg_; }

 private:
  void check_input(const TensorT<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != cfg_.input_channels || x.dim(2) != cfg_.input_size ||
        x.dim(3) != cfg_.input_size)
      throw std::invalid_argument("encoder: input shape " + shape_str(x.shape()) +
                                  " does not match configured " + cfg_.describe());
  }

  EncoderConfig cfg_;
  std::vector<Conv2dT<T>> convs_;
  Conv2dT<T> res1_, res2_;
  std::vector<LinearT<T>> fcs_;
  LayerNormT<T> norm_;
  std::vector<LinearT<T>> extras_;
  long conv_flat_ = 0, out_dim_ = 0, final_spatial_ = 0;
};

using PixelEncoder = PixelEncoderT<float>;

}  // namespace jointrl::agent
