#pragma once

#include <map>
#include <memory>

#include "jointrl/augment.hpp"
#include "jointrl/sac.hpp"
#include "jointrl/ssl_losses.hpp"

namespace jointrl::ssl {

struct SslHeadConfig {
  long proj_hidden = 256;
  long proj_out = 128;
  long mlp_hidden = 1024;
  float temperature = 0.1f;          // student / dot-mode temperature
  float teacher_temperature = 0.04f;
  float center_momentum = 0.9f;
  double mask_ratio = 0.5;
  int patch_size = 4;
  InfoNceMode curl_mode = InfoNceMode::bilinear;
  float rae_lambda_latent = 1e-6f;
  float rae_lambda_weights = 1e-7f;
  double shuffle_swap_prob = 0.5;

  void validate() const;
};

// Named weighted sum of losses plus the two augmentation magnitudes; doubles
// as the particle position layout in the evolutionary search.
struct LossCombo {
  std::vector<std::pair<std::string, double>> weights;
  int m1 = 100;
  int m2 = 100;

  double weight_of(const std::string& name) const;
  bool any_nonzero() const;
  void set(const std::string& name, double w);
};

// Registry of implemented loss names, in the paper's naming.
const std::vector<std::string>& registered_loss_names();
bool is_registered_loss(const std::string& name);

// Weighted sum over named scalar losses; unknown weighted names are config
// errors. Pure; used by tests and reporting.
double combo_loss_value(const LossCombo& combo, const std::map<std::string, double>& losses);

enum class SeparationPoint { A, B };

struct SslDims {
  long repr_dim = 50;
  int action_dim = 2;
  int image_size = 84;
  int image_channels = 9;
  agent::EncoderConfig encoder;
};

enum class View { s_a, s_a_next, s_p, s_p_next };

// Separate fc head over shared conv features (separation point B): the SSL
// branch splits off before the encoder's fc stack.
class BranchFc {
 public:
  BranchFc() = default;
  BranchFc(long in_dim, long repr_dim, RandomStream& rng);
  Var forward_online(const Var& conv_feats) const;
  Var forward_momentum(const Var& conv_feats) const;
  void momentum_ema(float tau);
  void collect(NamedParams<float>& out, const std::string& prefix) const;
  std::vector<Var> online_params() const;

 private:
  Linear fc_, fc_m_;
  LayerNormT<float> ln_, ln_m_;
};

// Per-update runtime the loss heads pull encodings and batch data from;
// encodings are cached so stacked losses share forward passes.
class SslContext {
 public:
  SslContext(agent::SacAgent& agent, const aug::BranchViews& views, const Tensor& actions,
             const Tensor& rewards, RandomStream& rng, SeparationPoint sep = SeparationPoint::A,
             BranchFc* branch_fc = nullptr);

  Var online_repr(View v);
  Var target_repr(View v);             // built under NoGrad, returned as constant
  Var online_repr_pre_tanh(View v);    // autoencoder latent
  Var encode_online(const ImageBatch& images);  // transformed images (rotation)
  const ImageBatch& images(View v) const;
  const Tensor& actions() const { return actions_; }
  const Tensor& rewards() const { return rewards_; }
  RandomStream& rng() { return rng_; }
  agent::SacAgent& sac() { return agent_; }
  long repr_dim() const;
  int batch_size() const { return views_.s_a.n; }

 private:
  Var encode(View v, bool online, bool pre_tanh);

  agent::SacAgent& agent_;
  const aug::BranchViews& views_;
  Tensor actions_, rewards_;
  RandomStream& rng_;
  SeparationPoint sep_;
  BranchFc* branch_fc_;
  std::map<int, Var> cache_;
};

class SslLoss {
 public:
  virtual ~SslLoss() = default;
  virtual const std::string& name() const = 0;
  virtual Var compute(SslContext& ctx) = 0;
  // Online head parameters (g_q side), trained by the SSL optimizer.
  virtual void collect(NamedParams<float>& out, const std::string& prefix) const {}
  // Momentum head EMA (g_k side); no-op for heads without one.
  virtual void momentum_ema(float tau) {}
};

struct ContextSpec {
  enum class Role { repr_next, action, reward };
  Role second_input = Role::repr_next;
  std::vector<Role> outputs;

  void validate() const;
  static ContextSpec from_name(const std::string& name);
};

std::unique_ptr<SslLoss> make_ssl_loss(const std::string& name, const SslHeadConfig& cfg,
                                       const SslDims& dims, RandomStream& rng);

// Owns the instantiated heads for every nonzero-weight loss in the combo and
// evaluates the weighted sum.
class SslModule {
 public:
  SslModule() = default;
  SslModule(const LossCombo& combo, const SslHeadConfig& cfg, const SslDims& dims,
            SeparationPoint sep, uint64_t init_seed);

  bool empty() const { return losses_.empty(); }
  Var compute_combo(SslContext& ctx, std::map<std::string, float>* report = nullptr);
  std::vector<Var> head_params() const;
  NamedParams<float> named_params() const;
  void momentum_ema(float tau);
  SeparationPoint separation() const { return sep_; }
  BranchFc* branch_fc() { return branch_fc_ ? branch_fc_.get() : nullptr; }
  const LossCombo& combo() const { return combo_; }

 private:
  LossCombo combo_;
  SeparationPoint sep_ = SeparationPoint::A;
  std::unique_ptr<BranchFc> branch_fc_;
  std::vector<std::unique_ptr<SslLoss>> losses_;
};

// Image rotation by k quarter turns (counterclockwise); pure, uint8 domain.
Image rotate90(const Image& img, int quarter_turns);

}  // namespace jointrl::ssl
