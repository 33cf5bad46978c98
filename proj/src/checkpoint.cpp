#include "gere/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

namespace gere {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'G', 'E', 'R', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw DataError("checkpoint truncated");
  return value;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, std::uint64_t limit) {
  auto n = get<std::uint64_t>(in);
  if (n > limit) throw DataError("checkpoint string length out of range");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw DataError("checkpoint truncated");
  return s;
}

void put_values(std::ostream& out, const Matrix<float>& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
}

void get_values(std::istream& in, Matrix<float>& m) {
  if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)))) {
    throw DataError("checkpoint truncated");
  }
}

}  // namespace

void save_checkpoint(std::ostream& out, const Model<float>& model, const AdamState<float>* optimizer,
                     std::uint64_t vocab_checksum, std::int64_t step) {
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  put_string(out, model.config.to_text());
  put(out, vocab_checksum);
  put(out, step);
  auto tensors = named_tensors(model.params);
  put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, m] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m->rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m->cols()));
    put_values(out, *m);
  }
  put<std::uint8_t>(out, optimizer ? 1 : 0);
  if (optimizer) {
    for (const auto& [name, m] : named_tensors(optimizer->first_moment)) put_values(out, *m);
    for (const auto& [name, m] : named_tensors(optimizer->second_moment)) put_values(out, *m);
  }
  if (!out) throw std::runtime_error("checkpoint write failed");
}

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const AdamState<float>* optimizer, std::uint64_t vocab_checksum, std::int64_t step) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    save_checkpoint(out, model, optimizer, vocab_checksum, step);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(std::istream& in, std::optional<std::uint64_t> expected_vocab_checksum) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw DataError("not a checkpoint file");
  }
  if (auto version = get<std::uint32_t>(in); version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ModelConfig config;
  try {
    config = ModelConfig::from_text(get_string(in, 1 << 20));
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  }
  ckpt.vocab_checksum = get<std::uint64_t>(in);
  if (expected_vocab_checksum && *expected_vocab_checksum != ckpt.vocab_checksum) {
    throw DataError("checkpoint was trained with a different vocabulary");
  }
  ckpt.step = get<std::int64_t>(in);

  // Shapes come from the stored config; the file must agree with them.
  ckpt.model.config = config;
  ckpt.model.params = make_model<float>(config).params;
  auto tensors = named_tensors(ckpt.model.params);
  if (get<std::uint64_t>(in) != tensors.size()) throw DataError("checkpoint tensor count mismatch");
  for (auto& [name, m] : tensors) {
    auto name_length = get<std::uint32_t>(in);
    if (name_length > 4096) throw DataError("checkpoint tensor name too long");
    std::string stored(name_length, '\0');
    if (!in.read(stored.data(), name_length)) throw DataError("checkpoint truncated");
    auto rows = get<std::uint64_t>(in);
    auto cols = get<std::uint64_t>(in);
    if (stored != name || rows != static_cast<std::uint64_t>(m->rows()) ||
        cols != static_cast<std::uint64_t>(m->cols())) {
      throw DataError("checkpoint tensor '" + stored + "' does not match the model layout");
    }
    get_values(in, *m);
  }
  if (get<std::uint8_t>(in)) {
    AdamState<float> state = make_adam_state(ckpt.model);
    state.step = ckpt.step;
    for (auto& [name, m] : named_tensors(state.first_moment)) get_values(in, *m);
    for (auto& [name, m] : named_tensors(state.second_moment)) get_values(in, *m);
    ckpt.optimizer = std::move(state);
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_vocab_checksum) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return load_checkpoint(in, expected_vocab_checksum);
}

}  // namespace gere
