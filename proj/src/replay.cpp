#include "jointrl/replay.hpp"

#include <fstream>

#include "jointrl/serialize.hpp"

namespace jointrl::train {

namespace {
constexpr uint64_t kBufferMagic = 0x3146554252554a50ull;  // "PJURBUF1"
constexpr uint32_t kBufferVersion = 1;
}  // namespace

ReplayBuffer::ReplayBuffer(long capacity, const env::EnvSpec& spec, int action_dim, int state_dim)
    : spec_(spec), capacity_(capacity), action_dim_(action_dim), state_dim_(state_dim) {
  if (capacity < 1) throw std::invalid_argument("replay: capacity must be >= 1");
  spec_.validate();
  // one fresh frame per step plus one per episode start keeps this bound safe
  frame_slots_ = capacity + spec_.frame_stack + 4;
  frames_.resize(static_cast<size_t>(frame_slots_) * frame_bytes());
}

int64_t ReplayBuffer::push_frame(const uint8_t* frame_data) {
  const int64_t id = next_frame_id_++;
  std::copy(frame_data, frame_data + frame_bytes(),
            frames_.begin() + static_cast<long>(id % frame_slots_) * static_cast<long>(frame_bytes()));
  // drop records whose oldest frame is about to be overwritten
  while (!records_.empty() && next_frame_id_ - records_.front().s_frames.front() >= frame_slots_)
    records_.pop_front();
  return id;
}

const uint8_t* ReplayBuffer::frame(int64_t id) const {
  return frames_.data() + static_cast<long>(id % frame_slots_) * static_cast<long>(frame_bytes());
}

void ReplayBuffer::begin_episode(const env::Observation& first_obs,
                                 std::span<const float> state) {
  if (first_obs.h != spec_.obs_render_size || first_obs.c != 3 * spec_.frame_stack)
    throw std::invalid_argument("replay: observation does not match env spec");
  if (static_cast<int>(state.size()) != state_dim_)
    throw std::invalid_argument("replay: state dimension mismatch");
  // initial observation replicates one frame; store it once
  const uint8_t* newest = first_obs.data.data() + first_obs.data.size() - frame_bytes();
  const int64_t id = push_frame(newest);
  stack_ids_.assign(static_cast<size_t>(spec_.frame_stack), id);
  last_state_.assign(state.begin(), state.end());
  episode_active_ = true;
}

void ReplayBuffer::add_step(std::span<const float> action, float reward,
                            const env::Observation& next_obs, bool done,
                            std::span<const float> next_state) {
  if (!episode_active_) throw std::logic_error("replay: add_step before begin_episode");
  if (static_cast<int>(action.size()) != action_dim_)
    throw std::invalid_argument("replay: action dimension mismatch");
  Record rec;
  rec.s_frames = stack_ids_;
  const uint8_t* newest = next_obs.data.data() + next_obs.data.size() - frame_bytes();
  rec.next_frame = push_frame(newest);
  rec.action.assign(action.begin(), action.end());
  rec.reward = reward;
  rec.done = done;
  rec.state = last_state_;
  rec.state_next.assign(next_state.begin(), next_state.end());
  records_.push_back(std::move(rec));
  while (static_cast<long>(records_.size()) > capacity_) records_.pop_front();

  stack_ids_.erase(stack_ids_.begin());
  stack_ids_.push_back(records_.back().next_frame);
  last_state_.assign(next_state.begin(), next_state.end());
  if (done) episode_active_ = false;
}

void ReplayBuffer::fill_observation(const Record& rec, bool next, uint8_t* dst) const {
  const size_t fb = frame_bytes();
  for (int j = 0; j < spec_.frame_stack; ++j) {
    const int64_t id = next ? (j + 1 < spec_.frame_stack ? rec.s_frames[static_cast<size_t>(j + 1)]
                                                         : rec.next_frame)
                            : rec.s_frames[static_cast<size_t>(j)];
    std::copy(frame(id), frame(id) + fb, dst + static_cast<size_t>(j) * fb);
  }
}

SampledBatch ReplayBuffer::sample(long batch_size, RandomStream& rng) const {
  if (records_.empty()) throw std::logic_error("replay: sample from empty buffer");
  if (batch_size < 1) throw std::invalid_argument("replay: batch_size must be >= 1");
  const int s = spec_.obs_render_size;
  SampledBatch b;
  b.s = ImageBatch(static_cast<int>(batch_size), 3 * spec_.frame_stack, s, s);
  b.s_next = ImageBatch(static_cast<int>(batch_size), 3 * spec_.frame_stack, s, s);
  b.actions = Tensor({batch_size, action_dim_});
  b.rewards = Tensor({batch_size, 1});
  b.dones = Tensor({batch_size, 1});
  b.state_dim = state_dim_;
  b.states.resize(static_cast<size_t>(batch_size) * state_dim_);
  b.states_next.resize(static_cast<size_t>(batch_size) * state_dim_);
  for (long i = 0; i < batch_size; ++i) {
    const auto& rec = records_[static_cast<size_t>(rng.randint(size()))];
    fill_observation(rec, false, b.s.image(static_cast<int>(i)));
    fill_observation(rec, true, b.s_next.image(static_cast<int>(i)));
    for (int a = 0; a < action_dim_; ++a) b.actions.at2(i, a) = rec.action[static_cast<size_t>(a)];
    b.rewards[i] = rec.reward;
    b.dones[i] = rec.done ? 1.0f : 0.0f;
    std::copy(rec.state.begin(), rec.state.end(), b.states.begin() + i * state_dim_);
    std::copy(rec.state_next.begin(), rec.state_next.end(), b.states_next.begin() + i * state_dim_);
  }
  return b;
}

env::Transition ReplayBuffer::transition(long index) const {
  if (index < 0 || index >= size()) throw std::out_of_range("replay: transition index");
  const Record& rec = records_[static_cast<size_t>(index)];
  const int s = spec_.obs_render_size;
  env::Transition t;
  t.s = env::Observation(s, s, 3 * spec_.frame_stack);
  t.s_next = env::Observation(s, s, 3 * spec_.frame_stack);
  fill_observation(rec, false, t.s.data.data());
  fill_observation(rec, true, t.s_next.data.data());
  t.action = rec.action;
  t.reward = rec.reward;
  t.done = rec.done;
  t.state = rec.state;
  t.state_next = rec.state_next;
  return t;
}

void ReplayBuffer::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("replay: cannot open " + path);
  detail::write_pod(os, kBufferMagic);
  detail::write_pod(os, kBufferVersion);
  detail::write_pod(os, spec_.hash());
  detail::write_pod(os, static_cast<int32_t>(action_dim_));
  detail::write_pod(os, static_cast<int32_t>(state_dim_));
  detail::write_pod(os, static_cast<int32_t>(spec_.obs_render_size));
  detail::write_pod(os, static_cast<int32_t>(spec_.frame_stack));
  detail::write_pod(os, static_cast<int64_t>(records_.size()));

  // Frames are rebased so the oldest referenced id becomes 0.
  const int64_t base = records_.empty() ? 0 : records_.front().s_frames.front();
  const int64_t count = records_.empty() ? 0 : next_frame_id_ - base;
  detail::write_pod(os, count);
  for (int64_t id = base; id < base + count; ++id)
    os.write(reinterpret_cast<const char*>(frame(id)), static_cast<std::streamsize>(frame_bytes()));
  for (const auto& rec : records_) {
    for (int64_t id : rec.s_frames) detail::write_pod(os, id - base);
    detail::write_pod(os, rec.next_frame - base);
    os.write(reinterpret_cast<const char*>(rec.action.data()),
             static_cast<std::streamsize>(sizeof(float) * rec.action.size()));
    detail::write_pod(os, rec.reward);
    detail::write_pod(os, static_cast<uint8_t>(rec.done ? 1 : 0));
    os.write(reinterpret_cast<const char*>(rec.state.data()),
             static_cast<std::streamsize>(sizeof(float) * rec.state.size()));
    os.write(reinterpret_cast<const char*>(rec.state_next.data()),
             static_cast<std::streamsize>(sizeof(float) * rec.state_next.size()));
  }
}

ReplayBuffer ReplayBuffer::load(const std::string& path, const env::EnvSpec& expected_spec) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("replay: cannot open " + path);
  if (detail::read_pod<uint64_t>(is) != kBufferMagic)
    throw std::runtime_error("replay: bad magic in " + path);
  if (detail::read_pod<uint32_t>(is) != kBufferVersion)
    throw std::runtime_error("replay: unsupported version in " + path);
  const uint64_t spec_hash = detail::read_pod<uint64_t>(is);
  if (spec_hash != expected_spec.hash())
    throw std::runtime_error("replay: env spec hash mismatch in " + path);
  const int action_dim = detail::read_pod<int32_t>(is);
  const int state_dim = detail::read_pod<int32_t>(is);
  const int render = detail::read_pod<int32_t>(is);
  const int fs = detail::read_pod<int32_t>(is);
  if (render != expected_spec.obs_render_size || fs != expected_spec.frame_stack)
    throw std::runtime_error("replay: observation geometry mismatch in " + path);
  const int64_t record_count = detail::read_pod<int64_t>(is);
  const int64_t frame_count = detail::read_pod<int64_t>(is);

  ReplayBuffer buf(std::max<long>(1, record_count), expected_spec, action_dim, state_dim);
  buf.frame_slots_ = frame_count + expected_spec.frame_stack + 4;
  buf.frames_.assign(static_cast<size_t>(buf.frame_slots_) * buf.frame_bytes(), 0);
  for (int64_t id = 0; id < frame_count; ++id) {
    is.read(reinterpret_cast<char*>(buf.frames_.data() + id * static_cast<int64_t>(buf.frame_bytes())),
            static_cast<std::streamsize>(buf.frame_bytes()));
  }
  buf.next_frame_id_ = frame_count;
  for (int64_t r = 0; r < record_count; ++r) {
    Record rec;
    rec.s_frames.resize(static_cast<size_t>(fs));
    for (auto& id : rec.s_frames) id = detail::read_pod<int64_t>(is);
    rec.next_frame = detail::read_pod<int64_t>(is);
    rec.action.resize(static_cast<size_t>(action_dim));
    is.read(reinterpret_cast<char*>(rec.action.data()),
            static_cast<std::streamsize>(sizeof(float) * rec.action.size()));
    rec.reward = detail::read_pod<float>(is);
    rec.done = detail::read_pod<uint8_t>(is) != 0;
    rec.state.resize(static_cast<size_t>(state_dim));
    is.read(reinterpret_cast<char*>(rec.state.data()),
            static_cast<std::streamsize>(sizeof(float) * rec.state.size()));
    rec.state_next.resize(static_cast<size_t>(state_dim));
    is.read(reinterpret_cast<char*>(rec.state_next.data()),
            static_cast<std::streamsize>(sizeof(float) * rec.state_next.size()));
    if (!is) throw std::runtime_error("replay: truncated records in " + path);
    buf.records_.push_back(std::move(rec));
  }
  return buf;
}

}  // namespace jointrl::train
