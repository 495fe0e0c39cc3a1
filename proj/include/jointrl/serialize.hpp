#pragma once

#include <fstream>
#include <unordered_map>

#include "jointrl/nn.hpp"

namespace jointrl {

inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

namespace detail {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("checkpoint: truncated stream");
  return v;
}

}  // namespace detail

constexpr uint64_t kCheckpointMagic = 0x314b43524c4a5250ull;  // "PRJLRCK1"
constexpr uint32_t kCheckpointVersion = 1;

// Versioned binary blob of named float tensors plus a config hash.
inline void save_checkpoint(std::ostream& os, const NamedParams<float>& params,
                            uint64_t config_hash) {
  detail::write_pod(os, kCheckpointMagic);
  detail::write_pod(os, kCheckpointVersion);
  detail::write_pod(os, config_hash);
  detail::write_pod(os, static_cast<uint32_t>(params.size()));
  for (const auto& [name, var] : params) {
    detail::write_pod(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const auto& t = var.value();
    detail::write_pod(os, static_cast<uint32_t>(t.rank()));
    for (long d : t.shape()) detail::write_pod(os, static_cast<int64_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(float)));
  }
}

inline void save_checkpoint(const std::string& path, const NamedParams<float>& params,
                            uint64_t config_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  save_checkpoint(os, params, config_hash);
}

// Loads into existing parameters by name; every stored tensor must match an
// existing parameter's shape. Returns the stored config hash.
inline uint64_t load_checkpoint(std::istream& is, const NamedParams<float>& params) {
  if (detail::read_pod<uint64_t>(is) != kCheckpointMagic)
    throw std::runtime_error("checkpoint: bad magic");
  if (detail::read_pod<uint32_t>(is) != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  const uint64_t config_hash = detail::read_pod<uint64_t>(is);
  const uint32_t count = detail::read_pod<uint32_t>(is);
  std::unordered_map<std::string, Var> by_name;
  for (const auto& [name, var] : params) by_name.emplace(name, var);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t len = detail::read_pod<uint32_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    const uint32_t rank = detail::read_pod<uint32_t>(is);
    std::vector<long> shape(rank);
    for (auto& d : shape) d = static_cast<long>(detail::read_pod<int64_t>(is));
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: unknown tensor " + name);
    auto& t = it->second.value();
    if (t.shape() != shape)
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor " + name);
  }
  return config_hash;
}

inline uint64_t load_checkpoint(const std::string& path, const NamedParams<float>& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  return load_checkpoint(is, params);
}

}  // namespace jointrl
