#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace gere {

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_heads = 4;
  int n_layers_enc = 2;
  int n_layers_dec = 2;
  int d_ff = 256;
  int max_positions = 128;
  double dropout_rate = 0.1;
  double label_smoothing = 0.1;
  // Standard deviation of the scaled Gaussian init is init_scale / sqrt(fan_in).
  double init_scale = 1.0;
  std::uint64_t seed = 1;

  // Throws std::invalid_argument on any violated constraint.
  void validate() const;

  std::map<std::string, std::string> to_map() const;
  // Unknown keys are left for the caller; recognised keys overwrite fields.
  void apply(const std::map<std::string, std::string>& values);
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Parses "key = value" lines; '#' starts a comment. Throws
// std::invalid_argument on a line without '='.
std::map<std::string, std::string> parse_key_values(const std::string& text);

}  // namespace gere
