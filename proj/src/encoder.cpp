#include "jointrl/encoder.hpp"

namespace jointrl::agent {

std::vector<int> EncoderConfig::resolved_strides() const {
  if (!strides.empty()) return strides;
  std::vector<int> s(static_cast<size_t>(conv_layers), 1);
  s[0] = 2;
  return s;
}

void EncoderConfig::validate() const {
  if (repr_dim <= 0) throw std::invalid_argument("encoder: repr_dim must be > 0");
  if (conv_layers < 2) throw std::invalid_argument("encoder: conv_layers must be >= 2");
  if (filters < 1) throw std::invalid_argument("encoder: filters must be >= 1");
  if (fc_layers < 1) throw std::invalid_argument("encoder: fc_layers must be >= 1");
  if (extra_linear < 0) throw std::invalid_argument("encoder: extra_linear must be >= 0");
  const auto s = resolved_strides();
  if (static_cast<int>(s.size()) != conv_layers)
    throw std::invalid_argument("encoder: strides must list one entry per conv layer");
  if (backbone == Backbone::residual_tail)
    for (size_t i = s.size() - 2; i < s.size(); ++i)
      if (s[i] != 1)
        throw std::invalid_argument(
            "encoder: residual tail requires stride 1 in the last two layers");
}

std::string EncoderConfig::describe() const {
  return "(" + std::to_string(input_channels) + "x" + std::to_string(input_size) + "x" +
         std::to_string(input_size) + ", conv" + std::to_string(conv_layers) + "x" +
         std::to_string(filters) + " -> " + std::to_string(repr_dim) + ")";
}

}  // namespace jointrl::agent
