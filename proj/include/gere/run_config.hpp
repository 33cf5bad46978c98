#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "gere/model_config.hpp"

namespace gere {

// Everything a pipeline run needs. Defaults follow the published training
// setup where it is stated: peak learning rate 3e-5, label smoothing 0.1,
// 10% warmup, 4096 tokens per batch, beam size 5.
struct RunConfig {
  // Paths
  std::filesystem::path wiki;
  std::filesystem::path claims;
  std::filesystem::path vocab;
  std::filesystem::path trie;
  std::filesystem::path checkpoint;
  std::filesystem::path output;

  ModelConfig model;
  std::size_t max_vocab = 50000;

  // Training horizon
  std::int64_t total_updates = 2000;
  double peak_learning_rate = 3e-5;
  double warmup_fraction = 0.10;
  std::size_t max_tokens = 4096;
  double clip_norm = 1.0;
  std::int64_t checkpoint_every = 500;
  std::int64_t log_every = 1;

  // Decoding
  int beam_size = 5;
  int max_titles = 10;
  int max_evidence_steps = 10;
  bool length_normalize = false;
  int threads = 1;

  std::uint64_t seed = 1;

  // Throws std::invalid_argument on a violated constraint.
  void validate() const;

  // Flat "key = value" view; model fields are prefixed with "model.".
  std::map<std::string, std::string> to_map() const;
  // Throws std::invalid_argument on an unknown key or a malformed value.
  void apply(const std::map<std::string, std::string>& values);
  std::string to_text() const;
  static RunConfig from_file(const std::filesystem::path& path);
};

}  // namespace gere
