#include "jointrl/sac.hpp"

#include <cmath>

namespace jointrl::agent {

namespace {

constexpr float kHalfLog2Pi = 0.9189385332046727f;  // 0.5 * ln(2*pi)

void freeze_params(const std::vector<Var>& params) {
  for (const auto& p : params) p.node()->requires_grad = false;
}

std::vector<long> hidden_list(const SacConfig& cfg) {
  return std::vector<long>(static_cast<size_t>(cfg.mlp_layers - 1), cfg.mlp_hidden);
}

}  // namespace

void SacConfig::validate() const {
  encoder.validate();
  if (action_dim < 1) throw std::invalid_argument("sac: action_dim must be >= 1");
  if (mlp_layers < 1) throw std::invalid_argument("sac: mlp_layers must be >= 1");
  if (actor_update_freq < 1 || target_update_freq < 1)
    throw std::invalid_argument("sac: update frequencies must be >= 1");
  if (!(init_alpha > 0.0f)) throw std::invalid_argument("sac: init_alpha must be > 0");
  for (float tau : {encoder_tau, critic_tau, head_tau})
    if (!(tau >= 0.0f && tau <= 1.0f)) throw std::out_of_range("sac: tau must lie in [0,1]");
}

uint64_t SacConfig::hash() const {
  std::string key =
      encoder.describe() + "|a" + std::to_string(action_dim) + "|l" + std::to_string(mlp_layers) +
      "x" + std::to_string(mlp_hidden) + "|g" + std::to_string(discount) + "|alpha" +
      std::to_string(init_alpha) + "|taus" + std::to_string(encoder_tau) + "," +
      std::to_string(critic_tau) + "," + std::to_string(head_tau) + "|freq" +
      std::to_string(actor_update_freq) + "," + std::to_string(target_update_freq);
  return fnv1a(key);
}

Tensor critic_target_values(const Tensor& reward, const Tensor& done, float gamma,
                            const Tensor& min_q, float alpha, const Tensor& log_pi) {
  if (!reward.same_shape(done) || !reward.same_shape(min_q) || !reward.same_shape(log_pi))
    throw std::invalid_argument("critic_target: shape mismatch");
  Tensor y = reward;
  for (long i = 0; i < y.size(); ++i)
    y[i] = reward[i] + gamma * (1.0f - done[i]) * (min_q[i] - alpha * log_pi[i]);
  return y;
}

SacAgent::SacAgent(const SacConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  RandomStream rng(mix_seed(init_seed, 0x5ac0));
  f_q_ = PixelEncoder(cfg_.encoder, rng);
  {
    RandomStream dummy(0);
    f_k_ = PixelEncoder(cfg_.encoder, dummy, /*trainable=*/false);
  }
  hard_copy(f_q_.params(), f_k_.params());

  const long repr = f_q_.out_dim();
  actor_ = Mlp(repr, hidden_list(cfg_), 2L * cfg_.action_dim, rng);
  q1_ = Mlp(repr + cfg_.action_dim, hidden_list(cfg_), 1, rng);
  q2_ = Mlp(repr + cfg_.action_dim, hidden_list(cfg_), 1, rng);
  {
    RandomStream dummy(1);
    q1_t_ = Mlp(repr + cfg_.action_dim, hidden_list(cfg_), 1, dummy);
    q2_t_ = Mlp(repr + cfg_.action_dim, hidden_list(cfg_), 1, dummy);
  }
  hard_copy(critic_params(), target_params_critics());
  freeze_params(target_params_critics());

  log_alpha_ = Var::leaf(Tensor::scalar(std::log(cfg_.init_alpha)), true);

  critic_opt_ = Adam(rl_online_params(), cfg_.critic_lr, cfg_.net_beta1, cfg_.beta2);
  actor_opt_ = Adam(actor_params(), cfg_.actor_lr, cfg_.net_beta1, cfg_.beta2);
  alpha_opt_ = Adam({log_alpha_}, cfg_.alpha_lr, cfg_.alpha_beta1, cfg_.beta2);
}

std::vector<Var> SacAgent::actor_params() const {
  NamedParams<float> named;
  actor_.collect(named, "actor");
  return strip_names(named);
}

std::vector<Var> SacAgent::critic_params() const {
  NamedParams<float> named;
  q1_.collect(named, "q1");
  q2_.collect(named, "q2");
  return strip_names(named);
}

std::vector<Var> SacAgent::target_params_critics() const {
  NamedParams<float> named;
  q1_t_.collect(named, "q1t");
  q2_t_.collect(named, "q2t");
  return strip_names(named);
}

std::vector<Var> SacAgent::rl_online_params() const {
  std::vector<Var> out = f_q_.params();
  for (auto& p : critic_params()) out.push_back(p);
  return out;
}

std::vector<Var> SacAgent::target_params() const {
  std::vector<Var> out = f_k_.params();
  for (auto& p : target_params_critics()) out.push_back(p);
  return out;
}

Var SacAgent::encode_var(const Tensor& obs, WhichEncoder which) const {
  const PixelEncoder& enc = which == WhichEncoder::online ? f_q_ : f_k_;
  return enc.forward(Var::constant(obs));
}

Tensor SacAgent::encode(const Tensor& obs, WhichEncoder which) const {
  NoGradGuard ng;
  return encode_var(obs, which).value();
}

Var SacAgent::encode_conv(const Tensor& obs) const {
  return f_q_.conv_features(Var::constant(obs));
}

Var SacAgent::encoder_head(const Var& feats, bool pre_tanh) const {
  return f_q_.head(feats, pre_tanh);
}

Var SacAgent::actor_mean(const Var& repr) const {
  Var out = actor_.forward(repr);
  return tanh_op(slice_cols(out, 0, cfg_.action_dim));
}

Var SacAgent::critic_forward(const Mlp& critic, const Var& repr, const Var& action) const {
  return critic.forward(concat_cols(repr, action));
}

Var SacAgent::critic_q1(const Var& repr, const Tensor& action, WhichEncoder which) const {
  const Mlp& q = which == WhichEncoder::online ? q1_ : q1_t_;
  return critic_forward(q, repr, Var::constant(action));
}

ActorSample SacAgent::sample_from_trunk(const Var& repr, const Tensor& eps) const {
  const long d = cfg_.action_dim;
  Var out = actor_.forward(repr);
  Var mu = slice_cols(out, 0, d);
  Var raw = slice_cols(out, d, 2 * d);
  // squash log_std into [log_std_min, log_std_max]
  Var log_std = add_scalar(
      scale(add_scalar(tanh_op(raw), 1.0f), 0.5f * (cfg_.log_std_max - cfg_.log_std_min)),
      cfg_.log_std_min);
  Var std = exp_op(log_std);
  Var pre = add(mu, mul_const(std, eps));
  Var action = tanh_op(pre);

  Var z = mul(sub(pre, mu), exp_op(neg(log_std)));
  Var gauss = sub(sub(scale(square(z), -0.5f), log_std),
                  Var::constant(Tensor::full(log_std.value().shape(), kHalfLog2Pi)));
  // tanh change of variables; the 1e-6 keeps the log finite at saturation
  Var corr = log_op(add_scalar(relu(add_scalar(neg(square(action)), 1.0f)), 1e-6f));
  Var log_prob = sub(row_sum(gauss), row_sum(corr));

  ActorSample s;
  s.action = action;
  s.log_prob = log_prob;
  s.mean_action = tanh_op(mu);
  return s;
}

ActorSample SacAgent::sample_action(const Var& repr, RandomStream& rng) const {
  Tensor eps = Tensor::normal({repr.value().rows(), cfg_.action_dim}, 0.0f, 1.0f, rng);
  return sample_from_trunk(repr, eps);
}

std::vector<float> SacAgent::act_stochastic(const ImageBatch& obs, RandomStream& rng) {
  NoGradGuard ng;
  Var repr = encode_var(to_float(obs), WhichEncoder::online);
  ActorSample s = sample_action(repr, rng);
  if (!all_finite(s.action.value()))
    throw TrainAbortError("sac: actor produced a non-finite action at update " +
                          std::to_string(update_count_));
  const float* p = s.action.value().data();
  return std::vector<float>(p, p + cfg_.action_dim);
}

std::vector<float> SacAgent::act_deterministic(const ImageBatch& obs) {
  NoGradGuard ng;
  Var repr = encode_var(to_float(obs), WhichEncoder::online);
  Var mean = actor_mean(repr);
  if (!all_finite(mean.value()))
    throw TrainAbortError("sac: actor produced a non-finite action at update " +
                          std::to_string(update_count_));
  const float* p = mean.value().data();
  return std::vector<float>(p, p + cfg_.action_dim);
}

Var SacAgent::critic_loss_graph(const Var& repr_s, const Tensor& actions, const Tensor& rewards,
                                const Tensor& dones, const ImageBatch& s_next, RandomStream& rng) {
  Tensor y;
  {
    NoGradGuard ng;
    Tensor next = to_float(s_next);
    Var repr_next_pi = encode_var(next, WhichEncoder::online);
    ActorSample next_a = sample_action(repr_next_pi, rng);
    Var repr_next_t = encode_var(next, WhichEncoder::target);
    Var q1t = critic_forward(q1_t_, repr_next_t, next_a.action);
    Var q2t = critic_forward(q2_t_, repr_next_t, next_a.action);
    Var min_q = min_elem(q1t, q2t);
    y = critic_target_values(rewards, dones, cfg_.discount, min_q.value(), alpha(),
                             next_a.log_prob.value());
  }
  Var action_var = Var::constant(actions);
  Var q1v = critic_forward(q1_, repr_s, action_var);
  Var q2v = critic_forward(q2_, repr_s, action_var);
  Var y_const = Var::constant(y);
  return add(mse(q1v, y_const), mse(q2v, y_const));
}

SacLossReport SacAgent::actor_alpha_update(const Tensor& repr_detached, RandomStream& rng,
                                           long step_index) {
  SacLossReport rep;
  rep.alpha = alpha();
  if ((step_index + 1) % cfg_.actor_update_freq != 0) return rep;

  Var repr = Var::constant(repr_detached);
  ActorSample s = sample_action(repr, rng);
  Var q1v = critic_forward(q1_, repr, s.action);
  Var q2v = critic_forward(q2_, repr, s.action);
  Var min_q = min_elem(q1v, q2v);
  Var actor_loss = mean_all(sub(scale(s.log_prob, alpha()), min_q));
  if (!all_finite(actor_loss.value()))
    throw TrainAbortError("sac: actor loss is not finite at update " + std::to_string(step_index));
  actor_opt_.zero_grad();
  backward(actor_loss);
  actor_opt_.step();

  // alpha step follows the actor step; the entropy gap is detached
  const Tensor& logp = s.log_prob.value();
  float mean_term = 0.0f;
  for (long i = 0; i < logp.size(); ++i) mean_term += -logp[i] - cfg_.resolved_target_entropy();
  mean_term /= static_cast<float>(logp.size());
  Var alpha_loss = scale(exp_op(log_alpha_), mean_term);
  if (!all_finite(alpha_loss.value()))
    throw TrainAbortError("sac: alpha loss is not finite at update " + std::to_string(step_index));
  alpha_opt_.zero_grad();
  backward(alpha_loss);
  alpha_opt_.step();

  rep.did_actor_step = true;
  rep.actor_loss = actor_loss.item();
  rep.alpha_loss = alpha_loss.item();
  rep.alpha = alpha();
  return rep;
}

SacLossReport SacAgent::update(const ImageBatch& s_a, const ImageBatch& s_a_next,
                               const Tensor& actions, const Tensor& rewards, const Tensor& dones,
                               RandomStream& rng) {
  Tensor obs = to_float(s_a);
  Var repr = encode_var(obs, WhichEncoder::online);
  Var critic_loss = critic_loss_graph(repr, actions, rewards, dones, s_a_next, rng);
  if (!all_finite(critic_loss.value()))
    throw TrainAbortError("sac: critic loss is not finite at update " +
                          std::to_string(update_count_));
  critic_opt_.zero_grad();
  backward(critic_loss);
  critic_opt_.step();

  // fresh encode after the critic step touched the encoder, detached so the
  // actor never updates encoder parameters
  Tensor repr_detached = encode(obs, WhichEncoder::online);
  SacLossReport rep = actor_alpha_update(repr_detached, rng, update_count_);
  rep.critic_loss = critic_loss.item();
  ++update_count_;
  return rep;
}

bool SacAgent::ema_step() {
  if (update_count_ % cfg_.target_update_freq != 0) return false;
  force_ema();
  return true;
}

void SacAgent::force_ema() {
  ema_update(f_q_.params(), f_k_.params(), cfg_.encoder_tau);
  ema_update(critic_params(), target_params_critics(), cfg_.critic_tau);
}

NamedParams<float> SacAgent::named_params() const {
  NamedParams<float> named;
  f_q_.collect(named, "f_q");
  f_k_.collect(named, "f_k");
  actor_.collect(named, "actor");
  q1_.collect(named, "q1");
  q2_.collect(named, "q2");
  q1_t_.collect(named, "q1_t");
  q2_t_.collect(named, "q2_t");
  named.emplace_back("log_alpha", log_alpha_);
  return named;
}

void SacAgent::save(const std::string& path) const {
  save_checkpoint(path, named_params(), cfg_.hash());
}

void SacAgent::load(const std::string& path) {
  const uint64_t stored = load_checkpoint(path, named_params());
  if (stored != cfg_.hash())
    throw std::runtime_error("sac: checkpoint config hash mismatch for " + path);
}

void SacAgent::copy_encoder_from(const SacAgent& donor) {
  hard_copy(donor.f_q_.params(), f_q_.params());
  hard_copy(f_q_.params(), f_k_.params());
}

}  // namespace jointrl::agent
