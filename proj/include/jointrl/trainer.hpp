#pragma once

#include "jointrl/replay.hpp"
#include "jointrl/ssl.hpp"

namespace jointrl::train {

enum class Regime { alternating, summed, pretrain_then_rl };

struct TrainConfig {
  env::EnvSpec env;
  aug::AugmentationSpec aug_online{aug::AugKind::random_crop, 100, 84};
  aug::AugmentationSpec aug_target{aug::AugKind::random_crop, 100, 84};
  ssl::LossCombo losses;  // empty or all-zero = plain RL
  ssl::SslHeadConfig ssl_head;
  ssl::SeparationPoint separation = ssl::SeparationPoint::A;
  Regime regime = Regime::alternating;
  long total_env_steps = 100000;
  long init_explore_steps = 1000;
  long batch_size = 512;
  long buffer_capacity = 100000;
  long eval_every = 1000;
  int eval_episodes = 10;
  float ssl_lr = 1e-3f;
  float w_ssl = 1.0f;  // summed-regime SSL weight
  long pretrain_steps = 0;
  std::string pretrain_dataset;
  agent::SacConfig sac;
  uint64_t seed = 1;
  std::string agent_name = "agent";

  void validate() const;
};

struct EvalPoint {
  long env_step = 0;
  double mean_return = 0.0;
};

struct RunResult {
  uint64_t seed = 0;
  std::vector<EvalPoint> series;
  double final_score = 0.0;
  bool failed = false;
  std::string fail_reason;
};

struct UpdateReport {
  agent::SacLossReport sac;
  float ssl_loss = 0.0f;
  std::map<std::string, float> ssl_parts;
  float total = 0.0f;  // summed regime: rl + w_ssl * ssl, exactly
  bool did_ema = false;
};

// One agent + SSL heads + optimizers; drives a single seeded run.
class JointTrainer {
 public:
  explicit JointTrainer(const TrainConfig& cfg);

  UpdateReport update(const SampledBatch& batch);
  RunResult run();

  // SSL-only optimization over a stored dataset; leaves actor/critics alone.
  void pretrain(ReplayBuffer& dataset, long steps);

  agent::SacAgent& sac() { return agent_; }
  ssl::SslModule& ssl_module() { return ssl_; }
  NamedParams<float> named_params() const;
  void save_checkpoint(const std::string& path) const;

 private:
  UpdateReport update_alternating(const SampledBatch& batch);
  UpdateReport update_summed(const SampledBatch& batch);
  Var ssl_combo_graph(const aug::BranchViews& views, const SampledBatch& batch,
                      std::map<std::string, float>* report);
  double evaluate(env::PixelEnv& eval_env, long eval_index);
  ImageBatch policy_input(const env::Observation& obs) const;

  TrainConfig cfg_;
  agent::SacAgent agent_;
  ssl::SslModule ssl_;
  Adam ssl_opt_;     // alternating regime: encoder + SSL heads at ssl_lr
  Adam summed_opt_;  // summed regime: encoder + critics + SSL heads
  RandomStream aug_rng_, update_rng_, action_rng_, sample_rng_;
  long summed_step_count_ = 0;
};

RunResult train_run(const TrainConfig& cfg);
RunResult pretrain_then_rl(const TrainConfig& cfg);
// Stage-1 pretraining folded into a ready stage-2 trainer (checkpointable).
std::unique_ptr<JointTrainer> make_pretrained_trainer(const TrainConfig& cfg);

// Collects a dataset with uniform-random actions into a buffer snapshot
// ("Pretrain-Random" donor data).
void collect_random_dataset(const TrainConfig& cfg, long steps, const std::string& out_path);

// Results file schema: one row per evaluation point.
std::string results_csv_header();
void append_results_csv(std::string& out, const TrainConfig& cfg, const RunResult& result);

}  // namespace jointrl::train
