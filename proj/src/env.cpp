#include "jointrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "jointrl/serialize.hpp"

namespace jointrl::env {

namespace {

constexpr uint8_t kBackground = 235;
constexpr std::array<uint8_t, 3> kAgentColor = {200, 40, 40};
constexpr std::array<uint8_t, 3> kTargetColor = {40, 90, 220};
constexpr double kAgentRadius = 4.0;   // px
constexpr int kTargetHalf = 4;         // px, square half-side

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace

void EnvSpec::validate() const {
  if (obs_render_size < 84) throw std::invalid_argument("env: obs_render_size must be >= 84");
  if (frame_stack < 1) throw std::invalid_argument("env: frame_stack must be >= 1");
  if (episode_len < 1) throw std::invalid_argument("env: episode_len must be >= 1");
  if (action_repeat < 1) throw std::invalid_argument("env: action_repeat must be >= 1");
  if (!(distance_threshold > 0.0)) throw std::invalid_argument("env: distance_threshold must be > 0");
}

uint64_t EnvSpec::hash() const {
  std::string key = name + "|" + std::to_string(obs_render_size) + "|" +
                    std::to_string(frame_stack) + "|" + std::to_string(action_repeat) + "|" +
                    std::to_string(episode_len) + "|" +
                    (reward_mode == RewardMode::sparse ? "sparse" : "dense") + "|" +
                    std::to_string(distance_threshold);
  return fnv1a(key);
}

PointReacherEnv::PointReacherEnv(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

Image PointReacherEnv::render_pose(const EnvSpec& spec, std::array<double, 2> agent,
                                   std::array<double, 2> target) {
  const int s = spec.obs_render_size;
  Image img(s, s, 3, kBackground);
  // Nearest rasterization, no anti-aliasing, so renders are bit-stable.
  const double scale = s - 1;
  const double tx = target[0] * scale, ty = target[1] * scale;
  const int tx0 = static_cast<int>(std::lround(tx)) - kTargetHalf;
  const int ty0 = static_cast<int>(std::lround(ty)) - kTargetHalf;
  for (int r = ty0; r <= ty0 + 2 * kTargetHalf; ++r) {
    if (r < 0 || r >= s) continue;
    for (int cx = tx0; cx <= tx0 + 2 * kTargetHalf; ++cx) {
      if (cx < 0 || cx >= s) continue;
      for (int ch = 0; ch < 3; ++ch) img.at(ch, r, cx) = kTargetColor[ch];
    }
  }
  const double ax = agent[0] * scale, ay = agent[1] * scale;
  const int lo_r = std::max(0, static_cast<int>(std::floor(ay - kAgentRadius)));
  const int hi_r = std::min(s - 1, static_cast<int>(std::ceil(ay + kAgentRadius)));
  const int lo_c = std::max(0, static_cast<int>(std::floor(ax - kAgentRadius)));
  const int hi_c = std::min(s - 1, static_cast<int>(std::ceil(ax + kAgentRadius)));
  const double r2 = kAgentRadius * kAgentRadius;
  for (int r = lo_r; r <= hi_r; ++r) {
    for (int cx = lo_c; cx <= hi_c; ++cx) {
      const double dy = r - ay, dx = cx - ax;
      if (dx * dx + dy * dy <= r2)
        for (int ch = 0; ch < 3; ++ch) img.at(ch, r, cx) = kAgentColor[ch];
    }
  }
  return img;
}

void PointReacherEnv::push_frame(const Image& frame) {
  const size_t plane = frame.plane_size() * 3;
  // Shift the stack one frame toward "older".
  std::copy(stack_.data.begin() + plane, stack_.data.end(), stack_.data.begin());
  std::copy(frame.data.begin(), frame.data.end(), stack_.data.end() - plane);
}

Observation PointReacherEnv::reset(uint64_t seed) {
  RandomStream rng(mix_seed(seed, 0x7261'6368));
  agent_ = {0.5, 0.5};
  target_ = {rng.uniform(), rng.uniform()};
  steps_taken_ = 0;
  active_ = true;
  const int s = spec_.obs_render_size;
  stack_ = Observation(s, s, 3 * spec_.frame_stack);
  Image frame = render_pose(spec_, agent_, target_);
  for (int i = 0; i < spec_.frame_stack; ++i) push_frame(frame);
  return stack_;
}

float PointReacherEnv::reward_for(double dist) const {
  if (spec_.reward_mode == RewardMode::sparse)
    return dist < spec_.distance_threshold ? 1.0f : -1e-3f;
  return static_cast<float>(-dist / std::sqrt(2.0));
}

StepResult PointReacherEnv::step(std::span<const float> action) {
  if (!active_) throw std::logic_error("env: step called before reset");
  if (action.size() != 2) throw std::invalid_argument("env: action must be 2-d");
  for (float a : action)
    if (!(a >= -1.0f && a <= 1.0f))
      throw std::out_of_range("env: action component outside [-1, 1]");

  float reward = 0.0f;
  for (int rep = 0; rep < spec_.action_repeat && steps_taken_ < spec_.episode_len; ++rep) {
    agent_[0] = clamp01(agent_[0] + action[0] * kStepScale);
    agent_[1] = clamp01(agent_[1] + action[1] * kStepScale);
    const double dx = agent_[0] - target_[0], dy = agent_[1] - target_[1];
    reward += reward_for(std::sqrt(dx * dx + dy * dy));
    ++steps_taken_;
  }
  push_frame(render_pose(spec_, agent_, target_));
  StepResult out;
  out.obs = stack_;
  out.reward = reward;
  out.done = steps_taken_ >= spec_.episode_len;
  if (out.done) active_ = false;
  return out;
}

std::vector<float> PointReacherEnv::state() const {
  return {static_cast<float>(agent_[0]), static_cast<float>(agent_[1]),
          static_cast<float>(target_[0]), static_cast<float>(target_[1])};
}

double PointReacherEnv::min_return() const {
  const int steps = spec_.episode_len;
  if (spec_.reward_mode == RewardMode::sparse) return steps * -1e-3;
  return steps * -1.0;  // dense reward is -dist/diag, bounded below by -1
}

std::unique_ptr<PixelEnv> make_env(const EnvSpec& spec) {
  if (spec.name != "point_reacher")
    throw std::invalid_argument("env: unknown environment '" + spec.name + "'");
  return std::make_unique<PointReacherEnv>(spec);
}

}  // namespace jointrl::env
