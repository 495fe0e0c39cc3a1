#include "jointrl/trainer.hpp"

#include <cinttypes>
#include <cstdio>
#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace jointrl::train {

namespace {

// Training loops churn through multi-MB graph tensors every update; keeping
// large blocks in the arena instead of mmap/munmap cycles avoids re-faulting
// the same pages thousands of times.
struct MallocTuning {
  MallocTuning() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  }
};
const MallocTuning malloc_tuning;

ssl::SslDims dims_from(const TrainConfig& cfg) {
  ssl::SslDims d;
  d.repr_dim = cfg.sac.encoder.repr_dim;
  d.action_dim = cfg.sac.action_dim;
  d.image_size = cfg.sac.encoder.input_size;
  d.image_channels = cfg.sac.encoder.input_channels;
  d.encoder = cfg.sac.encoder;
  return d;
}

std::vector<Var> with_heads(std::vector<Var> base, const ssl::SslModule& mod) {
  for (auto& p : mod.head_params()) base.push_back(p);
  return base;
}

std::string format_float(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  env.validate();
  sac.validate();
  aug_online.validate();
  aug_target.validate();
  if (init_explore_steps > total_env_steps)
    throw std::invalid_argument("train: init_explore_steps must be <= total_env_steps");
  if (batch_size > buffer_capacity)
    throw std::invalid_argument("train: batch_size must be <= buffer_capacity");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("train: eval_every must be >= 1");
  if (eval_episodes < 1) throw std::invalid_argument("train: eval_episodes must be >= 1");
  if (aug_online.out != sac.encoder.input_size || aug_target.out != sac.encoder.input_size)
    throw std::invalid_argument("train: augmentation output size must match encoder input");
  if (3 * env.frame_stack != sac.encoder.input_channels)
    throw std::invalid_argument("train: encoder input channels must equal 3 * frame_stack");
  for (const auto& [name, w] : losses.weights)
    if (!ssl::is_registered_loss(name))
      throw std::invalid_argument("train: unknown loss '" + name + "' in combo");
}

JointTrainer::JointTrainer(const TrainConfig& cfg)
    : cfg_(cfg), agent_(cfg.sac, mix_seed(cfg.seed, 0xA6E7)),
      ssl_(cfg.losses, cfg.ssl_head, dims_from(cfg), cfg.separation, mix_seed(cfg.seed, 0x55B)),
      aug_rng_(mix_seed(cfg.seed, 0xA06)), update_rng_(mix_seed(cfg.seed, 0x0BD)),
      action_rng_(mix_seed(cfg.seed, 0xAC7)), sample_rng_(mix_seed(cfg.seed, 0x5A3)) {
  cfg_.validate();
  if (!ssl_.empty()) {
    ssl_opt_ = Adam(with_heads(agent_.encoder_params(), ssl_), cfg_.ssl_lr, cfg_.sac.net_beta1,
                    cfg_.sac.beta2);
    summed_opt_ = Adam(with_heads(agent_.rl_online_params(), ssl_), cfg_.sac.critic_lr,
                       cfg_.sac.net_beta1, cfg_.sac.beta2);
  } else {
    summed_opt_ =
        Adam(agent_.rl_online_params(), cfg_.sac.critic_lr, cfg_.sac.net_beta1, cfg_.sac.beta2);
  }
}

ImageBatch JointTrainer::policy_input(const env::Observation& obs) const {
  ImageBatch b(1, obs.c, obs.h, obs.w);
  b.set_image(0, obs);
  return aug::center_crop(b, cfg_.sac.encoder.input_size);
}

Var JointTrainer::ssl_combo_graph(const aug::BranchViews& views, const SampledBatch& batch,
                                  std::map<std::string, float>* report) {
  ssl::SslContext ctx(agent_, views, batch.actions, batch.rewards, update_rng_, cfg_.separation,
                      ssl_.branch_fc());
  return ssl_.compute_combo(ctx, report);
}

UpdateReport JointTrainer::update(const SampledBatch& batch) {
  switch (cfg_.regime) {
    case Regime::summed:
      return update_summed(batch);
    case Regime::alternating:
    case Regime::pretrain_then_rl:
      return update_alternating(batch);
  }
  throw std::logic_error("trainer: bad regime");
}

UpdateReport JointTrainer::update_alternating(const SampledBatch& batch) {
  UpdateReport rep;
  const bool ssl_active = !ssl_.empty() && ssl_.combo().any_nonzero();
  // the momentum-branch views only exist for the SSL step
  aug::BranchViews views;
  if (ssl_active) {
    views = aug::make_branch_views(batch.s, batch.s_next, cfg_.aug_online, cfg_.aug_target,
                                   aug_rng_);
  } else {
    views.s_a = aug::apply(cfg_.aug_online, batch.s, aug_rng_);
    views.s_a_next = aug::apply(cfg_.aug_online, batch.s_next, aug_rng_);
  }
  rep.sac = agent_.update(views.s_a, views.s_a_next, batch.actions, batch.rewards, batch.dones,
                          update_rng_);
  rep.did_ema = agent_.ema_step();
  if (rep.did_ema) ssl_.momentum_ema(cfg_.sac.head_tau);
  if (ssl_active) {
    Var total = ssl_combo_graph(views, batch, &rep.ssl_parts);
    if (!all_finite(total.value()))
      throw agent::TrainAbortError("trainer: SSL combo loss is not finite");
    ssl_opt_.zero_grad();
    backward(total);
    ssl_opt_.step();
    rep.ssl_loss = total.item();
  }
  rep.total = rep.sac.critic_loss + rep.ssl_loss;
  return rep;
}

UpdateReport JointTrainer::update_summed(const SampledBatch& batch) {
  UpdateReport rep;
  // RL on the original (un-augmented, center-cropped) data; SSL on the views
  ImageBatch rl_s = aug::center_crop(batch.s, cfg_.sac.encoder.input_size);
  ImageBatch rl_next = aug::center_crop(batch.s_next, cfg_.sac.encoder.input_size);
  aug::BranchViews views =
      aug::make_branch_views(batch.s, batch.s_next, cfg_.aug_online, cfg_.aug_target, aug_rng_);

  Tensor rl_obs = to_float(rl_s);
  Var repr = agent_.encode_var(rl_obs, agent::WhichEncoder::online);
  Var rl_loss =
      agent_.critic_loss_graph(repr, batch.actions, batch.rewards, batch.dones, rl_next, update_rng_);
  Var total = rl_loss;
  if (!ssl_.empty() && ssl_.combo().any_nonzero()) {
    Var ssl_total = ssl_combo_graph(views, batch, &rep.ssl_parts);
    rep.ssl_loss = ssl_total.item();
    total = add(rl_loss, scale(ssl_total, cfg_.w_ssl));
  }
  if (!all_finite(total.value()))
    throw agent::TrainAbortError("trainer: summed loss is not finite");
  summed_opt_.zero_grad();
  backward(total);
  summed_opt_.step();

  rep.sac.critic_loss = rl_loss.item();
  rep.total = rep.sac.critic_loss + cfg_.w_ssl * rep.ssl_loss;

  Tensor repr_detached = agent_.encode(rl_obs, agent::WhichEncoder::online);
  auto actor_rep = agent_.actor_alpha_update(repr_detached, update_rng_, summed_step_count_);
  rep.sac.actor_loss = actor_rep.actor_loss;
  rep.sac.alpha_loss = actor_rep.alpha_loss;
  rep.sac.alpha = actor_rep.alpha;
  rep.sac.did_actor_step = actor_rep.did_actor_step;

  ++summed_step_count_;
  if (summed_step_count_ % cfg_.sac.target_update_freq == 0) {
    agent_.force_ema();
    ssl_.momentum_ema(cfg_.sac.head_tau);
    rep.did_ema = true;
  }
  return rep;
}

double JointTrainer::evaluate(env::PixelEnv& eval_env, long eval_index) {
  double total = 0.0;
  for (int ep = 0; ep < cfg_.eval_episodes; ++ep) {
    env::Observation obs =
        eval_env.reset(mix_seed(cfg_.seed, 0xE7A1 + static_cast<uint64_t>(eval_index),
                                static_cast<uint64_t>(ep)));
    double ep_return = 0.0;
    for (;;) {
      auto action = agent_.act_deterministic(policy_input(obs));
      auto sr = eval_env.step(action);
      ep_return += sr.reward;
      obs = std::move(sr.obs);
      if (sr.done) break;
    }
    total += ep_return;
  }
  return total / cfg_.eval_episodes;
}

RunResult JointTrainer::run() {
  RunResult result;
  result.seed = cfg_.seed;
  auto environment = env::make_env(cfg_.env);
  auto eval_env = env::make_env(cfg_.env);
  ReplayBuffer buffer(cfg_.buffer_capacity, cfg_.env, cfg_.sac.action_dim,
                      static_cast<int>(environment->state().size()));

  long eval_index = 0;
  result.series.push_back({0, evaluate(*eval_env, eval_index++)});

  long episode = 0;
  env::Observation obs = environment->reset(mix_seed(cfg_.seed, 0xE9, 0));
  buffer.begin_episode(obs, environment->state());

  try {
    for (long step = 1; step <= cfg_.total_env_steps; ++step) {
      std::vector<float> action(static_cast<size_t>(cfg_.sac.action_dim));
      if (step <= cfg_.init_explore_steps) {
        for (auto& a : action) a = static_cast<float>(action_rng_.uniform(-1.0, 1.0));
      } else {
        action = agent_.act_stochastic(policy_input(obs), action_rng_);
      }
      auto sr = environment->step(action);
      buffer.add_step(action, sr.reward, sr.obs, sr.done, environment->state());
      obs = std::move(sr.obs);
      if (sr.done) {
        ++episode;
        obs = environment->reset(mix_seed(cfg_.seed, 0xE9, static_cast<uint64_t>(episode)));
        buffer.begin_episode(obs, environment->state());
      }
      if (step > cfg_.init_explore_steps) {
        SampledBatch batch = buffer.sample(cfg_.batch_size, sample_rng_);
        update(batch);
      }
      const bool due = step % cfg_.eval_every == 0 || step == cfg_.total_env_steps;
      if (due && step > cfg_.init_explore_steps)
        result.series.push_back({step, evaluate(*eval_env, eval_index++)});
    }
  } catch (const agent::TrainAbortError& e) {
    result.failed = true;
    result.fail_reason = e.what();
  }
  result.final_score = result.series.back().mean_return;
  return result;
}

void JointTrainer::pretrain(ReplayBuffer& dataset, long steps) {
  if (ssl_.empty() || !ssl_.combo().any_nonzero())
    throw std::invalid_argument("pretrain: the loss combo is empty");
  for (long k = 0; k < steps; ++k) {
    SampledBatch batch = dataset.sample(cfg_.batch_size, sample_rng_);
    aug::BranchViews views =
        aug::make_branch_views(batch.s, batch.s_next, cfg_.aug_online, cfg_.aug_target, aug_rng_);
    Var total = ssl_combo_graph(views, batch, nullptr);
    if (!all_finite(total.value()))
      throw agent::TrainAbortError("pretrain: SSL loss is not finite at step " + std::to_string(k));
    ssl_opt_.zero_grad();
    backward(total);
    ssl_opt_.step();
    if ((k + 1) % cfg_.sac.target_update_freq == 0) {
      ema_update(agent_.encoder_params(), agent_.target_encoder().params(), cfg_.sac.encoder_tau);
      ssl_.momentum_ema(cfg_.sac.head_tau);
    }
  }
}

NamedParams<float> JointTrainer::named_params() const {
  NamedParams<float> named = agent_.named_params();
  for (auto& [name, v] : ssl_.named_params()) named.emplace_back(name, v);
  return named;
}

void JointTrainer::save_checkpoint(const std::string& path) const {
  jointrl::save_checkpoint(path, named_params(), cfg_.sac.hash());
}

RunResult train_run(const TrainConfig& cfg) {
  JointTrainer trainer(cfg);
  return trainer.run();
}

std::unique_ptr<JointTrainer> make_pretrained_trainer(const TrainConfig& cfg) {
  if (cfg.pretrain_dataset.empty())
    throw std::invalid_argument("pretrain_then_rl: no pretrain dataset configured");
  ReplayBuffer dataset = ReplayBuffer::load(cfg.pretrain_dataset, cfg.env);

  // Stage 1: encoder (+ SSL heads) optimized on the SSL loss only.
  TrainConfig stage1 = cfg;
  stage1.regime = Regime::alternating;
  JointTrainer pre(stage1);
  pre.pretrain(dataset, cfg.pretrain_steps);

  // Stage 2: fresh agent; only the trained encoder carries over and remains
  // tunable by the RL loss. The joint losses are dropped.
  TrainConfig stage2 = cfg;
  stage2.regime = Regime::alternating;
  stage2.losses = ssl::LossCombo{};
  auto trainer = std::make_unique<JointTrainer>(stage2);
  trainer->sac().copy_encoder_from(pre.sac());
  return trainer;
}

RunResult pretrain_then_rl(const TrainConfig& cfg) { return make_pretrained_trainer(cfg)->run(); }

void collect_random_dataset(const TrainConfig& cfg, long steps, const std::string& out_path) {
  auto environment = env::make_env(cfg.env);
  ReplayBuffer buffer(std::max<long>(steps, 1), cfg.env, cfg.sac.action_dim,
                      static_cast<int>(environment->state().size()));
  RandomStream rng(mix_seed(cfg.seed, 0xDA7A));
  long episode = 0;
  env::Observation obs = environment->reset(mix_seed(cfg.seed, 0xE9, 0));
  buffer.begin_episode(obs, environment->state());
  for (long step = 1; step <= steps; ++step) {
    std::vector<float> action(static_cast<size_t>(cfg.sac.action_dim));
    for (auto& a : action) a = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto sr = environment->step(action);
    buffer.add_step(action, sr.reward, sr.obs, sr.done, environment->state());
    obs = std::move(sr.obs);
    if (sr.done) {
      ++episode;
      obs = environment->reset(mix_seed(cfg.seed, 0xE9, static_cast<uint64_t>(episode)));
      buffer.begin_episode(obs, environment->state());
    }
  }
  buffer.save(out_path);
}

std::string results_csv_header() { return "agent_name,env,seed,env_step,eval_return\n"; }

void append_results_csv(std::string& out, const TrainConfig& cfg, const RunResult& result) {
  for (const auto& point : result.series) {
    out += cfg.agent_name;
    out += ',';
    out += cfg.env.name;
    out += ',';
    out += std::to_string(result.seed);
    out += ',';
    out += std::to_string(point.env_step);
    out += ',';
    out += format_float(point.mean_return);
    out += '\n';
  }
  if (result.failed) {
    out += cfg.agent_name;
    out += ',';
    out += cfg.env.name;
    out += ',';
    out += std::to_string(result.seed);
    out += ",-1,nan\n";
  }
}

}  // namespace jointrl::train
