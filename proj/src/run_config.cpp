#include "gere/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gere {
namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw std::invalid_argument("bad value for '" + key + "': '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("bad value for '" + key + "': '" + value + "'");
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid run config: ") + what);
  };
  require(warmup_fraction > 0.0 && warmup_fraction < 1.0, "warmup_fraction must be in (0, 1)");
  require(total_updates >= 1, "total_updates must be positive");
  require(peak_learning_rate > 0.0, "peak_learning_rate must be positive");
  require(max_tokens >= 1, "max_tokens must be positive");
  require(clip_norm > 0.0, "clip_norm must be positive");
  require(checkpoint_every >= 1 && log_every >= 1, "checkpoint_every and log_every must be positive");
  require(beam_size >= 1, "beam_size must be positive");
  require(max_titles >= 1, "max_titles must be positive");
  require(max_evidence_steps >= 1, "max_evidence_steps must be positive");
  require(threads >= 1, "threads must be positive");
  require(max_vocab > 6, "max_vocab must exceed the 6 reserved specials");
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> out = {
      {"wiki", wiki.string()},
      {"claims", claims.string()},
      {"vocab", vocab.string()},
      {"trie", trie.string()},
      {"checkpoint", checkpoint.string()},
      {"output", output.string()},
      {"max_vocab", std::to_string(max_vocab)},
      {"total_updates", std::to_string(total_updates)},
      {"peak_learning_rate", format_double(peak_learning_rate)},
      {"warmup_fraction", format_double(warmup_fraction)},
      {"max_tokens", std::to_string(max_tokens)},
      {"clip_norm", format_double(clip_norm)},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"log_every", std::to_string(log_every)},
      {"beam_size", std::to_string(beam_size)},
      {"max_titles", std::to_string(max_titles)},
      {"max_evidence_steps", std::to_string(max_evidence_steps)},
      {"length_normalize", length_normalize ? "true" : "false"},
      {"threads", std::to_string(threads)},
      {"seed", std::to_string(seed)},
  };
  for (const auto& [key, value] : model.to_map()) out["model." + key] = value;
  return out;
}

void RunConfig::apply(const std::map<std::string, std::string>& values) {
  std::map<std::string, std::string> model_values;
  for (const auto& [key, value] : values) {
    if (key.rfind("model.", 0) == 0) {
      std::string field = key.substr(6);
      if (!model.to_map().count(field)) throw std::invalid_argument("unknown config key '" + key + "'");
      model_values[field] = value;
    } else if (key == "wiki") wiki = value;
    else if (key == "claims") claims = value;
    else if (key == "vocab") vocab = value;
    else if (key == "trie") trie = value;
    else if (key == "checkpoint") checkpoint = value;
    else if (key == "output") output = value;
    else if (key == "max_vocab") max_vocab = parse_number<std::size_t>(key, value);
    else if (key == "total_updates") total_updates = parse_number<std::int64_t>(key, value);
    else if (key == "peak_learning_rate") peak_learning_rate = parse_number<double>(key, value);
    else if (key == "warmup_fraction") warmup_fraction = parse_number<double>(key, value);
    else if (key == "max_tokens") max_tokens = parse_number<std::size_t>(key, value);
    else if (key == "clip_norm") clip_norm = parse_number<double>(key, value);
    else if (key == "checkpoint_every") checkpoint_every = parse_number<std::int64_t>(key, value);
    else if (key == "log_every") log_every = parse_number<std::int64_t>(key, value);
    else if (key == "beam_size") beam_size = parse_number<int>(key, value);
    else if (key == "max_titles") max_titles = parse_number<int>(key, value);
    else if (key == "max_evidence_steps") max_evidence_steps = parse_number<int>(key, value);
    else if (key == "length_normalize") length_normalize = parse_bool(key, value);
    else if (key == "threads") threads = parse_number<int>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
  model.apply(model_values);
}

std::string RunConfig::to_text() const {
  std::string text;
  for (const auto& [key, value] : to_map()) text += key + " = " + value + "\n";
  return text;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  RunConfig config;
  config.apply(parse_key_values(buffer.str()));
  return config;
}

}  // namespace gere
