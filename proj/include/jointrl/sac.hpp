#pragma once

#include <limits>
#include <optional>

#include "jointrl/encoder.hpp"
#include "jointrl/optim.hpp"
#include "jointrl/serialize.hpp"

namespace jointrl::agent {

// Raised when a loss goes non-finite; runs record the failure, never retry.
struct TrainAbortError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SacConfig {
  EncoderConfig encoder;
  int action_dim = 2;
  int mlp_layers = 3;      // linear layers in actor trunk and critic heads
  int mlp_hidden = 1024;
  float discount = 0.99f;
  float init_alpha = 0.1f;
  float actor_lr = 1e-3f;
  float critic_lr = 1e-3f;
  float alpha_lr = 1e-4f;
  float alpha_beta1 = 0.5f;
  float net_beta1 = 0.9f;
  float beta2 = 0.999f;
  float encoder_tau = 0.05f;
  float critic_tau = 0.01f;
  float head_tau = 0.05f;  // momentum SSL head rate
  int actor_update_freq = 2;
  int target_update_freq = 2;
  float log_std_min = -10.0f;
  float log_std_max = 2.0f;
  // Resolved to -action_dim when left NaN.
  float target_entropy = std::numeric_limits<float>::quiet_NaN();

  float resolved_target_entropy() const {
    return std::isnan(target_entropy) ? -static_cast<float>(action_dim) : target_entropy;
  }
  uint64_t hash() const;
  void validate() const;
};

// y = r + gamma * (1 - done) * (min_q - alpha * log_pi), elementwise.
Tensor critic_target_values(const Tensor& reward, const Tensor& done, float gamma,
                            const Tensor& min_q, float alpha, const Tensor& log_pi);

struct ActorSample {
  Var action;     // tanh-squashed, (B, action_dim)
  Var log_prob;   // (B, 1)
  Var mean_action;
};

struct SacLossReport {
  float critic_loss = 0.0f;
  std::optional<float> actor_loss;
  std::optional<float> alpha_loss;
  float alpha = 0.0f;
  bool did_actor_step = false;
};

enum class WhichEncoder { online, target };

// Soft actor-critic over the pixel encoder, with target networks and EMA
// updates. One instance per run; not thread-safe.
class SacAgent {
 public:
  SacAgent(const SacConfig& cfg, uint64_t init_seed);

  // Forward through either encoder. Input must be scaled to [0,1].
  Var encode_var(const Tensor& obs, WhichEncoder which) const;
  Tensor encode(const Tensor& obs, WhichEncoder which) const;
  Var encode_conv(const Tensor& obs) const;  // flattened online conv features
  Var encoder_head(const Var& feats, bool pre_tanh = false) const;

  ActorSample sample_action(const Var& repr, RandomStream& rng) const;
  Var actor_mean(const Var& repr) const;  // deterministic tanh mean
  Var critic_q1(const Var& repr, const Tensor& action, WhichEncoder which) const;

  // Single-observation conveniences for rollout (center-cropped obs).
  std::vector<float> act_stochastic(const ImageBatch& obs, RandomStream& rng);
  std::vector<float> act_deterministic(const ImageBatch& obs);

  // Critic step every call; actor and alpha every actor_update_freq calls.
  // The actor step never touches encoder parameters.
  SacLossReport update(const ImageBatch& s_a, const ImageBatch& s_a_next, const Tensor& actions,
                       const Tensor& rewards, const Tensor& dones, RandomStream& rng);

  // Builds the critic loss subgraph on the given views without stepping;
  // summed-regime trainers combine it with the SSL loss in one step.
  Var critic_loss_graph(const Var& repr_s, const Tensor& actions, const Tensor& rewards,
                        const Tensor& dones, const ImageBatch& s_next, RandomStream& rng);
  // Actor/alpha update from a detached representation (freq-gated).
  SacLossReport actor_alpha_update(const Tensor& repr_detached, RandomStream& rng,
                                   long step_index);

  // EMA of target encoder + critics per target_update_freq; returns whether
  // this call performed the update (momentum SSL heads follow the same gate).
  bool ema_step();
  void force_ema();

  std::vector<Var> encoder_params() const { return f_q_.params(); }
  std::vector<Var> actor_params() const;
  std::vector<Var> critic_params() const;    // online critic heads only
  std::vector<Var> rl_online_params() const; // encoder + critic heads
  std::vector<Var> target_params() const;    // target encoder + target critics

  NamedParams<float> named_params() const;
  void save(const std::string& path) const;
  void load(const std::string& path);
  void copy_encoder_from(const SacAgent& donor);

  const SacConfig& config() const { return cfg_; }
  const PixelEncoder& online_encoder() const { return f_q_; }
  const PixelEncoder& target_encoder() const { return f_k_; }
  long update_count() const { return update_count_; }
  float alpha() const { return std::exp(log_alpha_.value()[0]); }

 private:
  ActorSample sample_from_trunk(const Var& repr, const TensorT<float>& eps) const;
  Var critic_forward(const MlpT<float>& critic, const Var& repr, const Var& action) const;
  std::vector<Var> target_params_critics() const;

  SacConfig cfg_;
  PixelEncoder f_q_, f_k_;
  Mlp actor_;
  Mlp q1_, q2_, q1_t_, q2_t_;
  Var log_alpha_;
  Adam critic_opt_, actor_opt_, alpha_opt_;
  long update_count_ = 0;
};

}  // namespace jointrl::agent
