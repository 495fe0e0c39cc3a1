#pragma once

#include <deque>
#include <span>

#include "jointrl/env.hpp"
#include "jointrl/tensor.hpp"

namespace jointrl::train {

struct SampledBatch {
  ImageBatch s, s_next;            // render-size stacked observations
  Tensor actions;                  // (B, action_dim)
  Tensor rewards, dones;           // (B, 1)
  std::vector<float> states, states_next;  // B x state_dim, row-major
  int state_dim = 0;
};

// FIFO transition store with uniform sampling over the filled region.
// Frames are stored once and shared between the stacked observations that
// reference them; the Transition-level contract is unchanged.
class ReplayBuffer {
 public:
  ReplayBuffer(long capacity, const env::EnvSpec& spec, int action_dim, int state_dim);

  void begin_episode(const env::Observation& first_obs, std::span<const float> state);
  void add_step(std::span<const float> action, float reward, const env::Observation& next_obs,
                bool done, std::span<const float> next_state);

  long size() const { return static_cast<long>(records_.size()); }
  long capacity() const { return capacity_; }
  bool empty() const { return records_.empty(); }

  SampledBatch sample(long batch_size, RandomStream& rng) const;
  env::Transition transition(long index) const;  // 0 = oldest stored

  void save(const std::string& path) const;
  static ReplayBuffer load(const std::string& path, const env::EnvSpec& expected_spec);

  const env::EnvSpec& spec() const { return spec_; }
  int action_dim() const { return action_dim_; }
  int state_dim() const { return state_dim_; }

 private:
  struct Record {
    std::vector<int64_t> s_frames;  // frame ids, oldest first; s' = s_frames[1..] + next_frame
    int64_t next_frame = 0;
    std::vector<float> action;
    float reward = 0.0f;
    bool done = false;
    std::vector<float> state, state_next;
  };

  int64_t push_frame(const uint8_t* frame_data);
  const uint8_t* frame(int64_t id) const;
  void fill_observation(const Record& rec, bool next, uint8_t* dst) const;
  size_t frame_bytes() const { return static_cast<size_t>(spec_.obs_render_size) * spec_.obs_render_size * 3; }

  env::EnvSpec spec_;
  long capacity_ = 0;
  int action_dim_ = 0, state_dim_ = 0;
  long frame_slots_ = 0;
  std::vector<uint8_t> frames_;
  int64_t next_frame_id_ = 0;
  std::vector<int64_t> stack_ids_;
  std::vector<float> last_state_;
  bool episode_active_ = false;
  std::deque<Record> records_;
};

}  // namespace jointrl::train
