#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>

#include "jointrl/image.hpp"
#include "jointrl/rng.hpp"

namespace jointrl::env {

enum class RewardMode { sparse, dense };

struct EnvSpec {
  std::string name = "point_reacher";
  int obs_render_size = 100;  // square render, pre-augmentation
  int frame_stack = 3;
  int action_repeat = 1;
  int episode_len = 200;
  RewardMode reward_mode = RewardMode::dense;
  double distance_threshold = 0.08;  // fraction of arena width, sparse mode

  void validate() const;
  uint64_t hash() const;
};

// Stacked pixel observation: channels = 3 * frame_stack, oldest frame first.
using Observation = Image;

struct Transition {
  Observation s;
  std::vector<float> action;
  float reward = 0.0f;
  Observation s_next;
  bool done = false;
  // Ground-truth simulator state, carried for representation probes.
  std::vector<float> state, state_next;
};

struct StepResult {
  Observation obs;
  float reward = 0.0f;
  bool done = false;
};

// Environment adapter contract. External suites plug in by implementing this;
// the built-in point reacher below is the reference implementation.
class PixelEnv {
 public:
  virtual ~PixelEnv() = default;
  virtual Observation reset(uint64_t seed) = 0;
  virtual StepResult step(std::span<const float> action) = 0;
  virtual int action_dim() const = 0;
  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<float> state() const = 0;
  // Lowest achievable episode return; used as the failed-run penalty.
  virtual double min_return() const = 0;
};

// Deterministic 2-d point reacher on the unit arena. The agent dot starts at
// the arena center; the target square is drawn uniformly from the reset seed.
// Actions are displacements: pos += a * kStepScale, clamped to the arena.
class PointReacherEnv : public PixelEnv {
 public:
  static constexpr double kStepScale = 0.08;  // fraction of arena width per unit action

  explicit PointReacherEnv(EnvSpec spec);

  Observation reset(uint64_t seed) override;
  StepResult step(std::span<const float> action) override;
  int action_dim() const override { return 2; }
  const EnvSpec& spec() const override { return spec_; }
  std::vector<float> state() const override;
  double min_return() const override;

  // Rasterize one pose; pure function of (spec, agent, target).
  static Image render_pose(const EnvSpec& spec, std::array<double, 2> agent,
                           std::array<double, 2> target);

  std::array<double, 2> agent_pos() const { return agent_; }
  std::array<double, 2> target_pos() const { return target_; }

 private:
  void push_frame(const Image& frame);
  float reward_for(double dist) const;

  EnvSpec spec_;
  std::array<double, 2> agent_{0.5, 0.5};
  std::array<double, 2> target_{0.5, 0.5};
  Observation stack_;
  int steps_taken_ = 0;
  bool active_ = false;
};

std::unique_ptr<PixelEnv> make_env(const EnvSpec& spec);

}  // namespace jointrl::env
