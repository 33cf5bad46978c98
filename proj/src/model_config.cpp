#include "gere/model_config.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

namespace gere {
namespace {

std::string trim(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw std::invalid_argument("bad value for '" + key + "': '" + value + "'");
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> values;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::string stripped = trim(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_number) +
                                  ": expected key = value");
    }
    values[trim(stripped.substr(0, eq))] = trim(stripped.substr(eq + 1));
  }
  return values;
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid model config: ") + what);
  };
  require(vocab_size > 6, "vocab_size must exceed the 6 reserved specials");
  require(d_model > 0 && n_heads > 0, "d_model and n_heads must be positive");
  require(d_model % n_heads == 0, "d_model must be divisible by n_heads");
  require(n_layers_enc >= 1 && n_layers_dec >= 1, "need at least one layer per stack");
  require(d_ff > 0, "d_ff must be positive");
  require(max_positions >= 2, "max_positions must be at least 2");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must be in [0, 1)");
  require(label_smoothing >= 0.0 && label_smoothing < 1.0,
          "label_smoothing must be in [0, 1)");
  require(init_scale > 0.0, "init_scale must be positive");
}

std::map<std::string, std::string> ModelConfig::to_map() const {
  return {
      {"vocab_size", std::to_string(vocab_size)},
      {"d_model", std::to_string(d_model)},
      {"n_heads", std::to_string(n_heads)},
      {"n_layers_enc", std::to_string(n_layers_enc)},
      {"n_layers_dec", std::to_string(n_layers_dec)},
      {"d_ff", std::to_string(d_ff)},
      {"max_positions", std::to_string(max_positions)},
      {"dropout_rate", format_double(dropout_rate)},
      {"label_smoothing", format_double(label_smoothing)},
      {"init_scale", format_double(init_scale)},
      {"seed", std::to_string(seed)},
  };
}

void ModelConfig::apply(const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    if (key == "vocab_size") vocab_size = parse_number<int>(key, value);
    else if (key == "d_model") d_model = parse_number<int>(key, value);
    else if (key == "n_heads") n_heads = parse_number<int>(key, value);
    else if (key == "n_layers_enc") n_layers_enc = parse_number<int>(key, value);
    else if (key == "n_layers_dec") n_layers_dec = parse_number<int>(key, value);
    else if (key == "d_ff") d_ff = parse_number<int>(key, value);
    else if (key == "max_positions") max_positions = parse_number<int>(key, value);
    else if (key == "dropout_rate") dropout_rate = parse_number<double>(key, value);
    else if (key == "label_smoothing") label_smoothing = parse_number<double>(key, value);
    else if (key == "init_scale") init_scale = parse_number<double>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  }
}

std::string ModelConfig::to_text() const {
  std::string text;
  for (const auto& [key, value] : to_map()) text += key + " = " + value + "\n";
  return text;
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig config;
  config.apply(parse_key_values(text));
  return config;
}

}  // namespace gere
