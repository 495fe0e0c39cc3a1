#include "jointrl/ssl.hpp"

#include <algorithm>

namespace jointrl::ssl {

void SslHeadConfig::validate() const {
  if (proj_hidden <= 0 || proj_out <= 0 || mlp_hidden <= 0)
    throw std::invalid_argument("ssl: head dimensions must be > 0");
  if (!(temperature > 0.0f) || !(teacher_temperature > 0.0f))
    throw std::invalid_argument("ssl: temperatures must be > 0");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0))
    throw std::invalid_argument("ssl: mask_ratio must lie in (0,1)");
  if (patch_size <= 0) throw std::invalid_argument("ssl: patch_size must be > 0");
}

double LossCombo::weight_of(const std::string& name) const {
  for (const auto& [n, w] : weights)
    if (n == name) return w;
  return 0.0;
}

bool LossCombo::any_nonzero() const {
  for (const auto& [n, w] : weights)
    if (w != 0.0) return true;
  return false;
}

void LossCombo::set(const std::string& name, double w) {
  for (auto& [n, cur] : weights)
    if (n == name) {
      cur = w;
      return;
    }
  weights.emplace_back(name, w);
}

const std::vector<std::string>& registered_loss_names() {
  static const std::vector<std::string> names = {
      "curl",       "curl_w_action", "curl_w_critic", "byol",
      "simsiam",    "dino",          "rotation_cls",  "shuffle_cls",
      "ae",         "mae",           "extract_a",     "extract_r",
      "guess_a",    "guess_f",       "predict_f",     "predict_r",
      "extract_ar", "guess_af",      "predict_fr",    "extract_ar_balanced",
      "guess_af_balanced", "predict_fr_balanced"};
  return names;
}

bool is_registered_loss(const std::string& name) {
  const auto& names = registered_loss_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

double combo_loss_value(const LossCombo& combo, const std::map<std::string, double>& losses) {
  double total = 0.0;
  for (const auto& [name, w] : combo.weights) {
    if (!is_registered_loss(name))
      throw std::invalid_argument("combo_loss: unknown loss name '" + name + "'");
    if (w == 0.0) continue;
    auto it = losses.find(name);
    if (it == losses.end())
      throw std::invalid_argument("combo_loss: no computed value for '" + name + "'");
    total += w * it->second;
  }
  return total;
}

Image rotate90(const Image& img, int quarter_turns) {
  if (img.h != img.w) throw std::invalid_argument("rotate90: image must be square");
  const int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return img;
  const int s = img.h;
  Image out(s, s, img.c);
  for (int ch = 0; ch < img.c; ++ch)
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) {
        // counterclockwise quarter turns
        int sr = r, sc = c;
        if (k == 1) {
          sr = c;
          sc = s - 1 - r;
        } else if (k == 2) {
          sr = s - 1 - r;
          sc = s - 1 - c;
        } else {
          sr = s - 1 - c;
          sc = r;
        }
        out.at(ch, r, c) = img.at(ch, sr, sc);
      }
  return out;
}

// ---------------------------------------------------------------------------
// BranchFc (separation point B)
// ---------------------------------------------------------------------------

BranchFc::BranchFc(long in_dim, long repr_dim, RandomStream& rng)
    : fc_(in_dim, repr_dim, rng), ln_(repr_dim) {
  RandomStream dummy(0);
  fc_m_ = Linear(in_dim, repr_dim, dummy);
  ln_m_ = LayerNormT<float>(repr_dim);
  NamedParams<float> on, mom;
  fc_.collect(on, "fc");
  ln_.collect(on, "ln");
  fc_m_.collect(mom, "fc");
  ln_m_.collect(mom, "ln");
  hard_copy(strip_names(on), strip_names(mom));
  for (auto& [n, v] : mom) v.node()->requires_grad = false;
}

Var BranchFc::forward_online(const Var& conv_feats) const {
  return ln_.forward(fc_.forward(conv_feats));
}

Var BranchFc::forward_momentum(const Var& conv_feats) const {
  return ln_m_.forward(fc_m_.forward(conv_feats));
}

void BranchFc::momentum_ema(float tau) {
  NamedParams<float> on, mom;
  fc_.collect(on, "fc");
  ln_.collect(on, "ln");
  fc_m_.collect(mom, "fc");
  ln_m_.collect(mom, "ln");
  ema_update(strip_names(on), strip_names(mom), tau);
}

void BranchFc::collect(NamedParams<float>& out, const std::string& prefix) const {
  fc_.collect(out, prefix + ".fc");
  ln_.collect(out, prefix + ".ln");
}

std::vector<Var> BranchFc::online_params() const {
  NamedParams<float> named;
  collect(named, "b");
  return strip_names(named);
}

// ---------------------------------------------------------------------------
// SslContext
// ---------------------------------------------------------------------------

SslContext::SslContext(agent::SacAgent& agent, const aug::BranchViews& views,
                       const Tensor& actions, const Tensor& rewards, RandomStream& rng,
                       SeparationPoint sep, BranchFc* branch_fc)
    : agent_(agent), views_(views), actions_(actions), rewards_(rewards), rng_(rng), sep_(sep),
      branch_fc_(branch_fc) {
  if (sep_ == SeparationPoint::B && branch_fc_ == nullptr)
    throw std::invalid_argument("ssl: separation point B requires a branch fc head");
}

const ImageBatch& SslContext::images(View v) const {
  switch (v) {
    case View::s_a: return views_.s_a;
    case View::s_a_next: return views_.s_a_next;
    case View::s_p: return views_.s_p;
    case View::s_p_next: return views_.s_p_next;
  }
  throw std::logic_error("ssl: bad view");
}

long SslContext::repr_dim() const {
  return sep_ == SeparationPoint::A ? agent_.online_encoder().out_dim()
                                    : agent_.online_encoder().config().repr_dim;
}

Var SslContext::encode(View v, bool online, bool pre_tanh) {
  const int key = static_cast<int>(v) * 4 + (online ? 2 : 0) + (pre_tanh ? 1 : 0);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  Tensor x = to_float(images(v));
  Var repr;
  if (online) {
    Var feats = agent_.online_encoder().conv_features(Var::constant(x));
    repr = sep_ == SeparationPoint::A ? agent_.online_encoder().head(feats, pre_tanh)
                                      : branch_fc_->forward_online(feats);
  } else {
    NoGradGuard ng;
    Var feats = agent_.target_encoder().conv_features(Var::constant(x));
    Var out = sep_ == SeparationPoint::A ? agent_.target_encoder().head(feats, pre_tanh)
                                         : branch_fc_->forward_momentum(feats);
    repr = Var::constant(out.value());
  }
  cache_.emplace(key, repr);
  return repr;
}

Var SslContext::online_repr(View v) { return encode(v, true, false); }
Var SslContext::target_repr(View v) { return encode(v, false, false); }
Var SslContext::online_repr_pre_tanh(View v) { return encode(v, true, true); }

Var SslContext::encode_online(const ImageBatch& images) {
  Tensor x = to_float(images);
  Var feats = agent_.online_encoder().conv_features(Var::constant(x));
  return sep_ == SeparationPoint::A ? agent_.online_encoder().head(feats)
                                    : branch_fc_->forward_online(feats);
}

// ---------------------------------------------------------------------------
// ContextSpec
// ---------------------------------------------------------------------------

void ContextSpec::validate() const {
  if (outputs.empty()) throw std::invalid_argument("context loss: outputs must be nonempty");
  std::vector<bool> used(3, false);
  used[static_cast<size_t>(second_input)] = true;
  for (Role r : outputs) {
    if (r == second_input)
      throw std::invalid_argument("context loss: second input cannot also be an output");
    if (used[static_cast<size_t>(r)])
      throw std::invalid_argument("context loss: duplicate output role");
    used[static_cast<size_t>(r)] = true;
  }
}

ContextSpec ContextSpec::from_name(const std::string& name) {
  using Role = ContextSpec::Role;
  ContextSpec spec;
  std::string base = name;
  const std::string suffix = "_balanced";
  if (base.size() > suffix.size() &&
      base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0)
    base = base.substr(0, base.size() - suffix.size());
  if (base == "extract_a") {
    spec.second_input = Role::repr_next;
    spec.outputs = {Role::action};
  } else if (base == "extract_r") {
    spec.second_input = Role::repr_next;
    spec.outputs = {Role::reward};
  } else if (base == "extract_ar") {
    spec.second_input = Role::repr_next;
    spec.outputs = {Role::action, Role::reward};
  } else if (base == "guess_a") {
    spec.second_input = Role::reward;
    spec.outputs = {Role::action};
  } else if (base == "guess_f") {
    spec.second_input = Role::reward;
    spec.outputs = {Role::repr_next};
  } else if (base == "guess_af") {
    spec.second_input = Role::reward;
    spec.outputs = {Role::action, Role::repr_next};
  } else if (base == "predict_f") {
    spec.second_input = Role::action;
    spec.outputs = {Role::repr_next};
  } else if (base == "predict_r") {
    spec.second_input = Role::action;
    spec.outputs = {Role::reward};
  } else if (base == "predict_fr") {
    spec.second_input = Role::action;
    spec.outputs = {Role::repr_next, Role::reward};
  } else {
    throw std::invalid_argument("context loss: unknown name '" + name + "'");
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Loss heads
// ---------------------------------------------------------------------------

namespace {

class CurlLoss final : public SslLoss {
 public:
  enum class Extra { none, action, critic };

  CurlLoss(std::string name, Extra extra, const SslHeadConfig& cfg, const SslDims& dims,
           RandomStream& rng)
      : name_(std::move(name)), extra_(extra), cfg_(cfg) {
    long dim = dims.repr_dim;
    if (extra_ == Extra::action) dim += dims.action_dim;
    if (extra_ == Extra::critic) dim += 1;
    if (cfg_.curl_mode == InfoNceMode::bilinear) {
      const float bound = std::sqrt(1.0f / static_cast<float>(dim));
      W_ = Var::leaf(Tensor::uniform({dim, dim}, -bound, bound, rng), true);
    }
  }

  const std::string& name() const override { return name_; }

  Var compute(SslContext& ctx) override {
    Var q = ctx.online_repr(View::s_a);
    Var k = ctx.target_repr(View::s_p);
    if (extra_ != Extra::none) {
      Tensor eq, ek;
      {
        NoGradGuard ng;
        if (extra_ == Extra::action) {
          eq = ctx.sac().actor_mean(Var::constant(q.value())).value();
          ek = ctx.sac().actor_mean(k).value();
        } else {
          eq = ctx.sac()
                   .critic_q1(Var::constant(q.value()), ctx.actions(), agent::WhichEncoder::online)
                   .value();
          ek = ctx.sac().critic_q1(k, ctx.actions(), agent::WhichEncoder::target).value();
        }
      }
      q = concat_cols(q, Var::constant(eq));
      k = concat_cols(k, Var::constant(ek));
    }
    return info_nce(q, k, cfg_.curl_mode, W_, cfg_.temperature);
  }

  void collect(NamedParams<float>& out, const std::string& prefix) const override {
    if (W_.defined()) out.emplace_back(prefix + ".W", W_);
  }

 private:
  std::string name_;
  Extra extra_;
  SslHeadConfig cfg_;
  Var W_;
};

// Projector with a frozen momentum copy, EMA-tracked.
struct ProjectorPair {
  Mlp online, momentum;

  ProjectorPair() = default;
  ProjectorPair(long in, long hidden, long out, RandomStream& rng) {
    online = Mlp(in, {hidden}, out, rng);
    RandomStream dummy(0);
    momentum = Mlp(in, {hidden}, out, dummy);
    sync();
    NamedParams<float> mom;
    momentum.collect(mom, "m");
    for (auto& [n, v] : mom) v.node()->requires_grad = false;
  }
  void sync() {
    NamedParams<float> on, mom;
    online.collect(on, "o");
    momentum.collect(mom, "m");
    hard_copy(strip_names(on), strip_names(mom));
  }
  void ema(float tau) {
    NamedParams<float> on, mom;
    online.collect(on, "o");
    momentum.collect(mom, "m");
    ema_update(strip_names(on), strip_names(mom), tau);
  }
};

class ByolLoss final : public SslLoss {
 public:
  ByolLoss(const SslHeadConfig& cfg, const SslDims& dims, RandomStream& rng)
      : proj_(dims.repr_dim, cfg.proj_hidden, cfg.proj_out, rng),
        pred_(cfg.proj_out, {cfg.proj_hidden}, cfg.proj_out, rng) {}

  const std::string& name() const override {
    static const std::string n = "byol";
    return n;
  }

  Var compute(SslContext& ctx) override {
    Var p1 = pred_.forward(proj_.online.forward(ctx.online_repr(View::s_a)));
    Var p1n = pred_.forward(proj_.online.forward(ctx.online_repr(View::s_a_next)));
    Tensor z2, z2n;
    {
      NoGradGuard ng;
      z2 = proj_.momentum.forward(ctx.target_repr(View::s_p)).value();
      z2n = proj_.momentum.forward(ctx.target_repr(View::s_p_next)).value();
    }
    return byol_loss(p1, Var::constant(z2), p1n, Var::constant(z2n));
  }

  void collect(NamedParams<float>& out, const std::string& prefix) const override {
    proj_.online.collect(out, prefix + ".proj");
    pred_.collect(out, prefix + ".pred");
  }

  void momentum_ema(float tau) override { proj_.ema(tau); }

 private:
  ProjectorPair proj_;
  Mlp pred_;
};

class SimSiamLoss final : public SslLoss {
 public:
  SimSiamLoss(const SslHeadConfig& cfg, const SslDims& dims, RandomStream& rng)
      : proj_(dims.repr_dim, {cfg.proj_hidden}, cfg.proj_out, rng),
        pred_(cfg.proj_out, {cfg.proj_hidden}, cfg.proj_out, rng) {}

  const std::string& name() const override {
    static const std::string n = "simsiam";
    return n;
  }

  Var compute(SslContext& ctx) override {
    // single branch: both views run through the online encoder
    auto pair_loss = [&](View a, View b) {
      Var za = proj_.forward(ctx.online_repr(a));
      Var zb = proj_.forward(ctx.online_repr(b));
      Var ha = pred_.forward(za);
      Var hb = pred_.forward(zb);
      return simsiam_loss(ha, hb, za.detach(), zb.detach());
    };
    return scale(add(pair_loss(View::s_a, View::s_p), pair_loss(View::s_a_next, View::s_p_next)),
                 0.5f);
  }

  void collect(NamedParams<float>& out, const std::string& prefix) const override {
    proj_.collect(out, prefix + ".proj");
    pred_.collect(out, prefix + ".pred");
  }

 private:
  Mlp proj_, pred_;
};

class DinoLoss final : public SslLoss {
 public:
  DinoLoss(const SslHeadConfig& cfg, const SslDims& dims, RandomStream& rng)
      : cfg_(cfg), proj_(dims.repr_dim, cfg.proj_hidden, cfg.proj_out, rng),
        center_(Tensor::zeros({1, cfg.proj_out})) {}

  const std::string& name() const override {
    static const std::string n = "dino";
    return n;
  }

  Var compute(SslContext& ctx) override {
    Var s1 = proj_.online.forward(ctx.online_repr(View::s_a));
    Var s2 = proj_.online.forward(ctx.online_repr(View::s_a_next));
    Tensor t1, t2;
    {
      NoGradGuard ng;
      t1 = proj_.momentum.forward(ctx.target_repr(View::s_p)).value();
      t2 = proj_.momentum.forward(ctx.target_repr(View::s_p_next)).value();
    }
    DinoResult<float> res =
        dino_loss(s1, Var::constant(t1), s2, Var::constant(t2), center_, cfg_.temperature,
                  cfg_.teacher_temperature, cfg_.center_momentum);
    center_ = res.new_center;
    return res.loss;
  }

  void collect(NamedParams<float>& out, const std::string& prefix) const override {
    proj_.online.collect(out, prefix + ".proj");
  }

  void momentum_ema(float tau) override { proj_.ema(tau); }

  const Tensor& center() const { return center_; }

 private:
  SslHeadConfig cfg_;
  ProjectorPair proj_;
  Tensor center_;
};

class RotationClsLoss final : public SslLoss {
 public:
  RotationClsLoss(const SslHeadConfig& cfg, const SslDims& dims, RandomStream& rng)
      : cls_(dims.repr_dim, {cfg.mlp_hidden}, 4, rng) {}

  const std::string& name() const override {
    static const std::string n = "rotation_cls";
    return n;
  }

  Var compute(SslContext& ctx) override {
    const ImageBatch& src = ctx.images(View::s_a);
    if (src.h != src.w) throw std::invalid_argument("rotation_cls: images must be square");
    ImageBatch rotated(src.n, src.c, src.h, src.w);
    std::vector<long> labels(static_cast<size_t>(src.n));
    for (int i = 0; i < src.n; ++i) {
      const int k = static_cast<int>(ctx.rng().randint(4));
      labels[static_cast<size_t>(i)] = k;
      rotated.set_image(i, rotate90(src.get_image(i), k));
    }
    Var logits = cls_.forward(ctx.encode_online(rotated));
    return cross_entropy_rows(logits, labels);
  }

  void collect(NamedParams<float>& out, const std::string& prefix) const override {
    cls_.collect(out, prefix + ".cls");
  }

 private:
  Mlp cls_;
};

class ShuffleClsLoss final : public SslLoss {
 public:
  ShuffleClsLoss(const SslHeadConfig& cfg, const SslDims& dims, RandomStream& rng)
      : cfg_(cfg), cls_(2 * dims.repr_dim + dims.action_dim, {cfg.mlp_hidden}, 1, rng) {}

  const std::string& name() const override {
    static const std::string n = "shuffle_cls";
    return n;
  }

  Var compute(SslContext& ctx) override {
    const ImageBatch& cur = ctx.images(View::s_a);
    const ImageBatch& nxt = ctx.images(View::s_a_next);
    ImageBatch x1(cur.n, cur.c, cur.h, cur.w), x2 = x1;
    std::vector<float> labels(static_cast<size_t>(cur.n));
    for (int i = 0; i < cur.n; ++i) {
      const bool swapped = ctx.rng().bernoulli(cfg_.shuffle_swap_prob);
      labels[static_cast<size_t>(i)] = swapped ? 1.0f : 0.0f;
      const uint8_t* first = swapped ? nxt.image(i) : cur.image(i);
      const uint8_t* second = swapped ? cur.image(i) : nxt.image(i);
      std::copy(first, first + x1.image_size(), x1.image(i));
      std::copy(second, second + x2.image_size(), x2.image(i));
    }
    Var r1 = ctx.encode_online(x1);
    Var r2 = ctx.encode_online(x2);
    Var logits = cls_.forward(concat_cols(concat_cols(r1, r2), Var::constant(ctx.actions())));
    return bce_with_logits(logits, labels);
  }

  void collect(NamedParams<float>& out, const std::string& prefix) const override {
    cls_.collect(out, prefix + ".cls");
  }

 private:
  SslHeadConfig cfg_;
  Mlp cls_;
};

// fc + transposed convs mirroring the encoder's conv stack; the out_pad per
// layer undoes the conv floor division, and the upper-left crop in the loss
// covers any remaining size mismatch (padded/residual encoders).
class PixelDecoder {
 public:
  PixelDecoder() = default;
  PixelDecoder(const agent::EncoderConfig& enc, long latent_dim, RandomStream& rng) {
    const auto strides = enc.resolved_strides();
    std::vector<long> sizes;
    long size = enc.input_size;
    sizes.push_back(size);
    for (int i = 0; i < enc.conv_layers; ++i) {
      size = (size - enc.kernel) / strides[static_cast<size_t>(i)] + 1;
      sizes.push_back(size);
    }
    bottom_ = sizes.back();
    filters_ = enc.filters;
    fc_ = Linear(latent_dim, filters_ * bottom_ * bottom_, rng);
    for (int i = enc.conv_layers - 1; i >= 0; --i) {
      const long out_ch = i == 0 ? enc.input_channels : filters_;
      const long s = strides[static_cast<size_t>(i)];
      long op = sizes[static_cast<size_t>(i)] -
                ((sizes[static_cast<size_t>(i + 1)] - 1) * s + enc.kernel);
      op = std::clamp<long>(op, 0, s);
      deconvs_.emplace_back(filters_, out_ch, enc.kernel, s, op, rng);
    }
  }

  Var forward(const Var& latent) const {
    Var h = relu(fc_.forward(latent));
    h = view(h, {latent.value().rows(), filters_, bottom_, bottom_});
    for (size_t i = 0; i < deconvs_.size(); ++i) {
      h = deconvs_[i].forward(h);
      if (i + 1 < deconvs_.size()) h = relu(h);
    }
    return h;
  }

  void collect(NamedParams<float>& out, const std::string& prefix) const {
    fc_.collect(out, prefix + ".fc");
    for (size_t i = 0; i < deconvs_.size(); ++i)
      deconvs_[i].collect(out, prefix + ".deconv" + std::to_string(i));
  }

  // weight tensors only (no biases), for the RAE weight penalty
  std::vector<Var> weight_tensors() const {
    NamedParams<float> named;
    collect(named, "d");
    std::vector<Var> out;
    for (auto& [n, v] : named)
      if (n.size() >= 2 && n.compare(n.size() - 2, 2, ".w") == 0) out.push_back(v);
    return out;
  }

 private:
  Linear fc_;
  std::vector<ConvT2dT<float>> deconvs_;
  long filters_ = 0, bottom_ = 0;
};

class AeLoss final : public SslLoss {
 public:
  AeLoss(const SslHeadConfig& cfg, const SslDims& dims, RandomStream& rng)
      : cfg_(cfg), decoder_(dims.encoder, dims.repr_dim, rng) {}

  const std::string& name() const override {
    static const std::string n = "ae";
    return n;
  }

  Var compute(SslContext& ctx) override {
    Var z = ctx.online_repr_pre_tanh(View::s_a);
    Var recon = decoder_.forward(z);
    Var target = Var::constant(to_float(ctx.images(View::s_a)));
    return rae_loss_terms(recon, target, z, decoder_.weight_tensors(), cfg_.rae_lambda_latent,
                          cfg_.rae_lambda_weights);
  }

  void collect(NamedParams<float>& out, const std::string& prefix) const override {
    decoder_.collect(out, prefix + ".dec");
  }

 private:
  SslHeadConfig cfg_;
  PixelDecoder decoder_;
};

class MaeLoss final : public SslLoss {
 public:
  MaeLoss(const SslHeadConfig& cfg, const SslDims& dims, RandomStream& rng)
      : cfg_(cfg), decoder_(dims.encoder, dims.repr_dim, rng) {}

  const std::string& name() const override {
    static const std::string n = "mae";
    return n;
  }

  Var compute(SslContext& ctx) override {
    const ImageBatch& src = ctx.images(View::s_a);
    const int side = src.h, patch = cfg_.patch_size;
    ImageBatch masked = src;
    Tensor mask({src.n, src.c, side, side});
    for (int i = 0; i < src.n; ++i) {
      PatchMask pm = make_patch_mask(side, patch, cfg_.mask_ratio, ctx.rng());
      uint8_t* img = masked.image(i);
      float* mimg = mask.data() + static_cast<long>(i) * src.c * side * side;
      for (int pr = 0; pr < pm.patches_per_side; ++pr)
        for (int pc = 0; pc < pm.patches_per_side; ++pc) {
          if (!pm.masked[static_cast<size_t>(pr * pm.patches_per_side + pc)]) continue;
          for (int ch = 0; ch < src.c; ++ch)
            for (int r = pr * patch; r < (pr + 1) * patch; ++r)
              for (int c = pc * patch; c < (pc + 1) * patch; ++c) {
                img[(static_cast<size_t>(ch) * side + r) * side + c] = 0;
                mimg[(static_cast<long>(ch) * side + r) * side + c] = 1.0f;
              }
        }
    }
    // masked input through the online branch; the RAE regularizers stay
    Var feats = ctx.sac().online_encoder().conv_features(Var::constant(to_float(masked)));
    Var z = ctx.sac().online_encoder().head(feats, /*pre_tanh=*/true);
    Var recon = decoder_.forward(z);
    const auto& rs = recon.value().shape();
    const long H = std::min<long>(rs[2], side), W = std::min<long>(rs[3], side);
    Var rec_c = crop4(recon, H, W);
    Var tgt_c = crop4(Var::constant(to_float(src)), H, W);
    Tensor mask_c = crop4_const(mask, H, W);
    Var rec_loss = masked_mse(rec_c, tgt_c, mask_c);
    Var latent_pen = scale(mean_all(row_sum(square(z))), cfg_.rae_lambda_latent);
    Var weight_pen = scale(sum_of_squares(decoder_.weight_tensors()), cfg_.rae_lambda_weights);
    return add(add(rec_loss, latent_pen), weight_pen);
  }

  void collect(NamedParams<float>& out, const std::string& prefix) const override {
    decoder_.collect(out, prefix + ".dec");
  }

 private:
  static Var crop4(const Var& x, long H, long W) {
    const auto& s = x.value().shape();
    if (s[2] == H && s[3] == W) return x;
    Var rows = slice_cols(view(x, {s[0] * s[1], s[2] * s[3]}), 0, H * s[3]);
    Var cols = slice_cols(view(rows, {s[0] * s[1] * H, s[3]}), 0, W);
    return view(cols, {s[0], s[1], H, W});
  }
  static Tensor crop4_const(const Tensor& x, long H, long W) {
    if (x.dim(2) == H && x.dim(3) == W) return x;
    Tensor out({x.dim(0), x.dim(1), H, W});
    for (long b = 0; b < x.dim(0); ++b)
      for (long c = 0; c < x.dim(1); ++c)
        for (long r = 0; r < H; ++r)
          for (long w = 0; w < W; ++w)
            out[((b * x.dim(1) + c) * H + r) * W + w] =
                x[((b * x.dim(1) + c) * x.dim(2) + r) * x.dim(3) + w];
    return out;
  }

  SslHeadConfig cfg_;
  PixelDecoder decoder_;
};

class ContextLoss final : public SslLoss {
 public:
  ContextLoss(std::string name, const SslHeadConfig& cfg, const SslDims& dims, RandomStream& rng)
      : name_(std::move(name)), spec_(ContextSpec::from_name(name_)), dims_(dims) {
    balanced_ = name_.size() > 9 && name_.compare(name_.size() - 9, 9, "_balanced") == 0;
    const long in_dim = dims.repr_dim + role_dim(spec_.second_input);
    trunk_ = Linear(in_dim, cfg.mlp_hidden, rng);
    for (ContextSpec::Role r : spec_.outputs) heads_.emplace_back(cfg.mlp_hidden, role_dim(r), rng);
  }

  const std::string& name() const override { return name_; }

  Var compute(SslContext& ctx) override {
    Var input = concat_cols(ctx.online_repr(View::s_a), role_input(ctx, spec_.second_input));
    Var h = relu(trunk_.forward(input));
    std::vector<Var> preds, targets;
    for (size_t i = 0; i < heads_.size(); ++i) {
      preds.push_back(heads_[i].forward(h));
      targets.push_back(role_target(ctx, spec_.outputs[i]));
    }
    if (balanced_ && preds.size() == 2)
      return balanced_combine(mse(preds[0], targets[0]), mse(preds[1], targets[1]));
    if (preds.size() == 1) return mse(preds[0], targets[0]);
    // default mode: error averaged per element of the concatenated outputs
    Var pred = preds[0], target = targets[0];
    for (size_t i = 1; i < preds.size(); ++i) {
      pred = concat_cols(pred, preds[i]);
      target = concat_cols(target, targets[i]);
    }
    return mse(pred, target);
  }

  void collect(NamedParams<float>& out, const std::string& prefix) const override {
    trunk_.collect(out, prefix + ".trunk");
    for (size_t i = 0; i < heads_.size(); ++i)
      heads_[i].collect(out, prefix + ".head" + std::to_string(i));
  }

 private:
  long role_dim(ContextSpec::Role r) const {
    switch (r) {
      case ContextSpec::Role::repr_next: return dims_.repr_dim;
      case ContextSpec::Role::action: return dims_.action_dim;
      case ContextSpec::Role::reward: return 1;
    }
    throw std::logic_error("context loss: bad role");
  }
  Var role_input(SslContext& ctx, ContextSpec::Role r) const {
    switch (r) {
      case ContextSpec::Role::repr_next: return ctx.online_repr(View::s_a_next);
      case ContextSpec::Role::action: return Var::constant(ctx.actions());
      case ContextSpec::Role::reward: return Var::constant(ctx.rewards());
    }
    throw std::logic_error("context loss: bad role");
  }
  Var role_target(SslContext& ctx, ContextSpec::Role r) const {
    switch (r) {
      case ContextSpec::Role::repr_next: return ctx.target_repr(View::s_p_next);
      case ContextSpec::Role::action: return Var::constant(ctx.actions());
      case ContextSpec::Role::reward: return Var::constant(ctx.rewards());
    }
    throw std::logic_error("context loss: bad role");
  }

  std::string name_;
  ContextSpec spec_;
  SslDims dims_;
  bool balanced_ = false;
  Linear trunk_;
  std::vector<Linear> heads_;
};

}  // namespace

std::unique_ptr<SslLoss> make_ssl_loss(const std::string& name, const SslHeadConfig& cfg,
                                       const SslDims& dims, RandomStream& rng) {
  cfg.validate();
  if (name == "curl") return std::make_unique<CurlLoss>(name, CurlLoss::Extra::none, cfg, dims, rng);
  if (name == "curl_w_action")
    return std::make_unique<CurlLoss>(name, CurlLoss::Extra::action, cfg, dims, rng);
  if (name == "curl_w_critic")
    return std::make_unique<CurlLoss>(name, CurlLoss::Extra::critic, cfg, dims, rng);
  if (name == "byol") return std::make_unique<ByolLoss>(cfg, dims, rng);
  if (name == "simsiam") return std::make_unique<SimSiamLoss>(cfg, dims, rng);
  if (name == "dino") return std::make_unique<DinoLoss>(cfg, dims, rng);
  if (name == "rotation_cls") return std::make_unique<RotationClsLoss>(cfg, dims, rng);
  if (name == "shuffle_cls") return std::make_unique<ShuffleClsLoss>(cfg, dims, rng);
  if (name == "ae") return std::make_unique<AeLoss>(cfg, dims, rng);
  if (name == "mae") return std::make_unique<MaeLoss>(cfg, dims, rng);
  if (is_registered_loss(name)) return std::make_unique<ContextLoss>(name, cfg, dims, rng);
  throw std::invalid_argument("ssl: unknown loss name '" + name + "'");
}

SslModule::SslModule(const LossCombo& combo, const SslHeadConfig& cfg, const SslDims& dims,
                     SeparationPoint sep, uint64_t init_seed)
    : combo_(combo), sep_(sep) {
  for (const auto& [name, w] : combo.weights)
    if (!is_registered_loss(name))
      throw std::invalid_argument("ssl: unknown loss name '" + name + "' in combo");
  RandomStream rng(mix_seed(init_seed, 0x551));
  if (sep_ == SeparationPoint::B) {
    RandomStream dummy(0);
    agent::PixelEncoderT<float> probe(dims.encoder, dummy, /*trainable=*/false);
    branch_fc_ = std::make_unique<BranchFc>(probe.conv_flat_dim(), dims.encoder.repr_dim, rng);
  }
  for (const auto& [name, w] : combo.weights)
    if (w != 0.0) losses_.push_back(make_ssl_loss(name, cfg, dims, rng));
}

Var SslModule::compute_combo(SslContext& ctx, std::map<std::string, float>* report) {
  Var total = Var::scalar(0.0f);
  for (auto& loss : losses_) {
    Var value = loss->compute(ctx);
    if (report) (*report)[loss->name()] = value.item();
    total = add(total, scale(value, static_cast<float>(combo_.weight_of(loss->name()))));
  }
  return total;
}

std::vector<Var> SslModule::head_params() const {
  NamedParams<float> named = named_params();
  return strip_names(named);
}

NamedParams<float> SslModule::named_params() const {
  NamedParams<float> named;
  if (branch_fc_) branch_fc_->collect(named, "ssl.branch_fc");
  for (const auto& loss : losses_) loss->collect(named, "ssl." + loss->name());
  return named;
}

void SslModule::momentum_ema(float tau) {
  if (branch_fc_) branch_fc_->momentum_ema(tau);
  for (auto& loss : losses_) loss->momentum_ema(tau);
}

}  // namespace jointrl::ssl
