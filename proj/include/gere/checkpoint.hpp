#pragma once

// Binary checkpoint of a float model plus optional Adam state.
//
// Layout (little-endian):
//   "GERECKPT" u32 version
//   u64 config_length, config text (ModelConfig::to_text)
//   u64 vocab_checksum, i64 step
//   u64 tensor_count, then per tensor: u32 name_length, name, u64 rows,
//   u64 cols, rows*cols float32 row-major
//   u8 has_optimizer, then (if set) first and second moments in the same
//   tensor order, each as rows*cols float32
//
// Saving then loading reproduces every float bit-for-bit.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "gere/model.hpp"
#include "gere/trainer.hpp"

namespace gere {

struct Checkpoint {
  Model<float> model;
  std::optional<AdamState<float>> optimizer;
  std::uint64_t vocab_checksum = 0;
  std::int64_t step = 0;
};

void save_checkpoint(std::ostream& out, const Model<float>& model, const AdamState<float>* optimizer,
                     std::uint64_t vocab_checksum, std::int64_t step);
// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const AdamState<float>* optimizer, std::uint64_t vocab_checksum, std::int64_t step);

// Throws DataError on a malformed file, or when expected_vocab_checksum is
// given and differs from the stored one.
Checkpoint load_checkpoint(std::istream& in, std::optional<std::uint64_t> expected_vocab_checksum = {});
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_vocab_checksum = {});

}  // namespace gere
