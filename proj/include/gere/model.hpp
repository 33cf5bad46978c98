#pragma once

// Encoder-decoder model: claim encoder, title decoder, sentence encoder and
// evidence decoder, each with its own parameters. The title decoder and the
// evidence decoder both cross-attend to the claim encoding.

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gere/corpus.hpp"
#include "gere/layers.hpp"
#include "gere/model_config.hpp"
#include "gere/tokenizer.hpp"

namespace gere {

template <typename S>
struct Encoder {
  Matrix<S> token_embedding;     // vocab x d
  Matrix<S> position_embedding;  // max_positions x d
  std::vector<EncoderLayer<S>> layers;
  LayerNorm<S> final_norm;
};

template <typename S>
struct TitleDecoder {
  Matrix<S> token_embedding;
  Matrix<S> position_embedding;
  std::vector<DecoderLayer<S>> layers;
  LayerNorm<S> final_norm;
  Linear<S> output;  // d x vocab
};

// Input rows are [start, e_1, ..., e_{g-1}] where e_i are sentence
// embeddings; `end` is the learned end-of-evidence (EOE) vector scored next
// to the candidates.
template <typename S>
struct EvidenceDecoder {
  Matrix<S> start;  // 1 x d
  Matrix<S> end;    // 1 x d
  Matrix<S> position_embedding;
  std::vector<DecoderLayer<S>> layers;
  LayerNorm<S> final_norm;
};

template <typename S>
struct ModelParams {
  Encoder<S> claim_encoder;
  TitleDecoder<S> title_decoder;
  Encoder<S> sentence_encoder;
  EvidenceDecoder<S> evidence_decoder;
};

template <typename S, typename F>
void visit(Encoder<S>& p, const std::string& prefix, F& f) {
  f(prefix + ".token_embedding", p.token_embedding);
  f(prefix + ".position_embedding", p.position_embedding);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    visit(p.layers[i], prefix + ".layers." + std::to_string(i), f);
  }
  visit(p.final_norm, prefix + ".final_norm", f);
}

template <typename S, typename F>
void visit(TitleDecoder<S>& p, const std::string& prefix, F& f) {
  f(prefix + ".token_embedding", p.token_embedding);
  f(prefix + ".position_embedding", p.position_embedding);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    visit(p.layers[i], prefix + ".layers." + std::to_string(i), f);
  }
  visit(p.final_norm, prefix + ".final_norm", f);
  visit(p.output, prefix + ".output", f);
}

template <typename S, typename F>
void visit(EvidenceDecoder<S>& p, const std::string& prefix, F& f) {
  f(prefix + ".start", p.start);
  f(prefix + ".end", p.end);
  f(prefix + ".position_embedding", p.position_embedding);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    visit(p.layers[i], prefix + ".layers." + std::to_string(i), f);
  }
  visit(p.final_norm, prefix + ".final_norm", f);
}

template <typename S, typename F>
void visit(ModelParams<S>& p, F& f) {
  visit(p.claim_encoder, "claim_encoder", f);
  visit(p.title_decoder, "title_decoder", f);
  visit(p.sentence_encoder, "sentence_encoder", f);
  visit(p.evidence_decoder, "evidence_decoder", f);
}

template <typename S>
using NamedTensors = std::vector<std::pair<std::string, Matrix<S>*>>;

// Stable, name-ordered view of every parameter tensor.
template <typename S>
NamedTensors<S> named_tensors(ModelParams<S>& p) {
  NamedTensors<S> out;
  auto collect = [&out](const std::string& name, Matrix<S>& m) { out.emplace_back(name, &m); };
  visit(p, collect);
  return out;
}

template <typename S>
std::vector<std::pair<std::string, const Matrix<S>*>> named_tensors(const ModelParams<S>& p) {
  std::vector<std::pair<std::string, const Matrix<S>*>> out;
  for (auto& [name, m] : named_tensors(const_cast<ModelParams<S>&>(p))) out.emplace_back(name, m);
  return out;
}

template <typename S>
ModelParams<S> zeros_like(const ModelParams<S>& p) {
  ModelParams<S> z = p;
  auto zero = [](const std::string&, Matrix<S>& m) { m.setZero(); };
  visit(z, zero);
  return z;
}

template <typename S>
std::size_t parameter_count(const ModelParams<S>& p) {
  std::size_t n = 0;
  for (const auto& [name, m] : named_tensors(p)) n += static_cast<std::size_t>(m->size());
  return n;
}

template <typename S>
struct Model {
  ModelConfig config;
  ModelParams<S> params;
};

namespace detail {

template <typename S>
Encoder<S> make_encoder(const ModelConfig& c, std::mt19937_64& rng) {
  const double emb_std = c.init_scale / std::sqrt(static_cast<double>(c.d_model));
  Encoder<S> e;
  e.token_embedding = gaussian<S>(c.vocab_size, c.d_model, emb_std, rng);
  e.position_embedding = gaussian<S>(c.max_positions, c.d_model, emb_std, rng);
  for (int i = 0; i < c.n_layers_enc; ++i) {
    e.layers.push_back({make_layer_norm<S>(c.d_model), make_attention<S>(c.d_model, c.init_scale, rng),
                        make_layer_norm<S>(c.d_model),
                        make_feed_forward<S>(c.d_model, c.d_ff, c.init_scale, rng)});
  }
  e.final_norm = make_layer_norm<S>(c.d_model);
  return e;
}

template <typename S>
std::vector<DecoderLayer<S>> make_decoder_layers(const ModelConfig& c, std::mt19937_64& rng) {
  std::vector<DecoderLayer<S>> layers;
  for (int i = 0; i < c.n_layers_dec; ++i) {
    DecoderLayer<S> layer;
    layer.self_norm = make_layer_norm<S>(c.d_model);
    layer.self_attention = make_attention<S>(c.d_model, c.init_scale, rng);
    layer.cross_norm = make_layer_norm<S>(c.d_model);
    layer.cross_attention = make_attention<S>(c.d_model, c.init_scale, rng);
    layer.ffn_norm = make_layer_norm<S>(c.d_model);
    layer.ffn = make_feed_forward<S>(c.d_model, c.d_ff, c.init_scale, rng);
    layers.push_back(std::move(layer));
  }
  return layers;
}

}  // namespace detail

template <typename S>
Model<S> make_model(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const double emb_std = config.init_scale / std::sqrt(static_cast<double>(config.d_model));
  Model<S> model;
  model.config = config;
  auto& p = model.params;
  p.claim_encoder = detail::make_encoder<S>(config, rng);

  p.title_decoder.token_embedding = gaussian<S>(config.vocab_size, config.d_model, emb_std, rng);
  p.title_decoder.position_embedding =
      gaussian<S>(config.max_positions, config.d_model, emb_std, rng);
  p.title_decoder.layers = detail::make_decoder_layers<S>(config, rng);
  p.title_decoder.final_norm = make_layer_norm<S>(config.d_model);
  p.title_decoder.output = make_linear<S>(config.d_model, config.vocab_size, config.init_scale, rng);

  p.sentence_encoder = detail::make_encoder<S>(config, rng);

  p.evidence_decoder.start = gaussian<S>(1, config.d_model, emb_std, rng);
  p.evidence_decoder.end = gaussian<S>(1, config.d_model, emb_std, rng);
  p.evidence_decoder.position_embedding =
      gaussian<S>(config.max_positions, config.d_model, emb_std, rng);
  p.evidence_decoder.layers = detail::make_decoder_layers<S>(config, rng);
  p.evidence_decoder.final_norm = make_layer_norm<S>(config.d_model);
  return model;
}

// Converts every tensor to another scalar type (e.g. float -> double for
// gradient checking).
template <typename To, typename From>
Model<To> cast_model(const Model<From>& from) {
  Model<To> to;
  to.config = from.config;
  // Build the same structure, then copy tensors in visit order.
  ModelConfig shape = from.config;
  to.params = make_model<To>(shape).params;
  auto src = named_tensors(from.params);
  auto dst = named_tensors(to.params);
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<To>();
  return to;
}

// ---------------------------------------------------------------------------
// Stack forward / backward, shared by inference and training.

template <typename S>
struct EncoderCache {
  std::vector<TokenId> tokens;
  Matrix<S> embedding_mask;
  std::vector<EncoderLayerCache<S>> layers;
  LayerNormCache<S> final_norm;
};

template <typename S>
Matrix<S> run_encoder(const Encoder<S>& p, const ModelConfig& cfg, TokenSpan tokens,
                      const Dropout<S>& dropout, std::type_identity_t<EncoderCache<S>>* cache) {
  const auto n = static_cast<Eigen::Index>(tokens.size());
  Matrix<S> x(n, cfg.d_model);
  for (Eigen::Index t = 0; t < n; ++t) {
    x.row(t) = p.token_embedding.row(tokens[t]) + p.position_embedding.row(t);
  }
  if (cache) {
    cache->tokens.assign(tokens.begin(), tokens.end());
    cache->layers.resize(p.layers.size());
  }
  x = apply_dropout(std::move(x), dropout, cache ? &cache->embedding_mask : nullptr);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    x = encoder_layer(p.layers[l], std::move(x), cfg.n_heads, dropout,
                      cache ? &cache->layers[l] : nullptr);
  }
  return layer_norm(p.final_norm, x, cache ? &cache->final_norm : nullptr);
}

template <typename S>
void run_encoder_backward(const Encoder<S>& p, Encoder<S>& g, const ModelConfig& cfg,
                          const EncoderCache<S>& c, const Matrix<S>& dout) {
  Matrix<S> dx = layer_norm_backward(p.final_norm, g.final_norm, c.final_norm, dout);
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    dx = encoder_layer_backward(p.layers[l], g.layers[l], c.layers[l], cfg.n_heads, std::move(dx));
  }
  dx = dropout_backward(c.embedding_mask, std::move(dx));
  for (Eigen::Index t = 0; t < dx.rows(); ++t) {
    g.token_embedding.row(c.tokens[t]) += dx.row(t);
    g.position_embedding.row(t) += dx.row(t);
  }
}

template <typename S>
struct DecoderStackCache {
  Matrix<S> input_mask;
  std::vector<DecoderLayerCache<S>> layers;
  LayerNormCache<S> final_norm;
};

template <typename S>
Matrix<S> run_decoder_stack(const std::vector<DecoderLayer<S>>& layers, const LayerNorm<S>& final_norm,
                            Matrix<S> x, const Matrix<S>& memory, int heads,
                            const Dropout<S>& dropout, std::type_identity_t<DecoderStackCache<S>>* cache) {
  if (cache) cache->layers.resize(layers.size());
  x = apply_dropout(std::move(x), dropout, cache ? &cache->input_mask : nullptr);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    x = decoder_layer(layers[l], std::move(x), memory, heads, dropout,
                      cache ? &cache->layers[l] : nullptr);
  }
  return layer_norm(final_norm, x, cache ? &cache->final_norm : nullptr);
}

// Returns the gradient w.r.t. the stack input; adds into `dmemory`.
template <typename S>
Matrix<S> run_decoder_stack_backward(const std::vector<DecoderLayer<S>>& layers,
                                     std::vector<DecoderLayer<S>>& glayers,
                                     const LayerNorm<S>& final_norm, LayerNorm<S>& gfinal,
                                     const DecoderStackCache<S>& c, int heads,
                                     const Matrix<S>& dout, Matrix<S>& dmemory) {
  Matrix<S> dx = layer_norm_backward(final_norm, gfinal, c.final_norm, dout);
  for (std::size_t l = layers.size(); l-- > 0;) {
    dx = decoder_layer_backward(layers[l], glayers[l], c.layers[l], heads, std::move(dx), dmemory);
  }
  return dropout_backward(c.input_mask, std::move(dx));
}

template <typename S>
Matrix<S> embed_title_prefix(const TitleDecoder<S>& p, TokenSpan tokens) {
  Matrix<S> x(static_cast<Eigen::Index>(tokens.size()), p.token_embedding.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    x.row(t) = p.token_embedding.row(tokens[t]) + p.position_embedding.row(t);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Inference API

template <typename S>
struct ClaimEncoding {
  Matrix<S> states;                  // length x d_model
  std::vector<std::uint8_t> mask;    // 1 for every valid position
  bool truncated = false;            // input exceeded max_positions
};

template <typename S>
struct SentenceEmbedding {
  Vector<S> vector;
  EvidenceId source;
};

namespace detail {

inline void check_tokens(TokenSpan tokens, int vocab_size, const char* what) {
  for (TokenId t : tokens) {
    if (t < 0 || t >= vocab_size) {
      throw std::out_of_range(std::string(what) + ": token id " + std::to_string(t) +
                              " outside the vocabulary");
    }
  }
}

}  // namespace detail

// Encodes claim tokens (no BOS/EOS). Inputs longer than max_positions are
// truncated and flagged.
template <typename S>
ClaimEncoding<S> encode_claim(const Model<S>& model, TokenSpan tokens) {
  if (tokens.empty()) throw std::invalid_argument("encode_claim: empty claim");
  detail::check_tokens(tokens, model.config.vocab_size, "encode_claim");
  ClaimEncoding<S> enc;
  const auto limit = static_cast<std::size_t>(model.config.max_positions);
  if (tokens.size() > limit) {
    tokens = tokens.first(limit);
    enc.truncated = true;
  }
  enc.states = run_encoder(model.params.claim_encoder, model.config, tokens, Dropout<S>{}, nullptr);
  enc.mask.assign(tokens.size(), 1);
  return enc;
}

// Logits for the token following `prefix` (which starts with BOS),
// recomputing the whole prefix.
template <typename S>
Vector<S> decode_step_title(const Model<S>& model, const ClaimEncoding<S>& enc, TokenSpan prefix) {
  if (prefix.empty()) throw std::invalid_argument("decode_step_title: empty prefix");
  if (prefix.front() != kBos) throw std::invalid_argument("decode_step_title: prefix must start with BOS");
  if (prefix.size() > static_cast<std::size_t>(model.config.max_positions)) {
    throw std::invalid_argument("decode_step_title: prefix exceeds max_positions");
  }
  detail::check_tokens(prefix, model.config.vocab_size, "decode_step_title");
  const auto& p = model.params.title_decoder;
  Matrix<S> h = run_decoder_stack(p.layers, p.final_norm, embed_title_prefix(p, prefix), enc.states,
                                  model.config.n_heads, Dropout<S>{}, nullptr);
  Vector<S> logits = (h.row(h.rows() - 1) * p.output.weight + p.output.bias.row(0)).transpose();
  return logits;
}

// Mean of the sentence encoder's final states. An empty sentence is encoded
// as the single EOS token so blank corpus lines stay addressable.
template <typename S>
SentenceEmbedding<S> encode_sentence(const Model<S>& model, TokenSpan tokens, EvidenceId source = {}) {
  static constexpr TokenId kEmpty[] = {kEos};
  if (tokens.empty()) tokens = kEmpty;
  detail::check_tokens(tokens, model.config.vocab_size, "encode_sentence");
  tokens = tokens.first(std::min(tokens.size(), static_cast<std::size_t>(model.config.max_positions)));
  Matrix<S> states = run_encoder(model.params.sentence_encoder, model.config, tokens, Dropout<S>{}, nullptr);
  return {states.colwise().mean().transpose(), std::move(source)};
}

namespace detail {

template <typename S>
Matrix<S> evidence_inputs(const EvidenceDecoder<S>& p, std::span<const Vector<S>* const> previous) {
  Matrix<S> x(static_cast<Eigen::Index>(previous.size()) + 1, p.start.cols());
  x.row(0) = p.start.row(0);
  for (std::size_t g = 0; g < previous.size(); ++g) {
    x.row(static_cast<Eigen::Index>(g) + 1) = previous[g]->transpose();
  }
  x += p.position_embedding.topRows(x.rows());
  return x;
}

template <typename S>
Matrix<S> score_table(const EvidenceDecoder<S>& p, std::span<const Vector<S>* const> candidates) {
  Matrix<S> table(static_cast<Eigen::Index>(candidates.size()) + 1, p.end.cols());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    table.row(static_cast<Eigen::Index>(i)) = candidates[i]->transpose();
  }
  table.row(table.rows() - 1) = p.end.row(0);
  return table;
}

template <typename S>
std::vector<const Vector<S>*> vectors_of(std::span<const SentenceEmbedding<S>> embeddings) {
  std::vector<const Vector<S>*> out;
  out.reserve(embeddings.size());
  for (const auto& e : embeddings) out.push_back(&e.vector);
  return out;
}

}  // namespace detail

// Scores over [candidates..., EOE] for the next evidence identifier given
// the previously generated ones. Entry i is the dot product of the decoder
// state with candidate i; the last entry scores EOE.
template <typename S>
Vector<S> decode_step_evidence(const Model<S>& model, const ClaimEncoding<S>& enc,
                               std::span<const SentenceEmbedding<S>> previous,
                               std::span<const SentenceEmbedding<S>> candidates) {
  if (candidates.empty()) throw std::invalid_argument("decode_step_evidence: no candidates");
  if (previous.size() + 1 > static_cast<std::size_t>(model.config.max_positions)) {
    throw std::invalid_argument("decode_step_evidence: too many previous identifiers");
  }
  const auto& p = model.params.evidence_decoder;
  auto prev = detail::vectors_of(previous);
  auto cands = detail::vectors_of(candidates);
  Matrix<S> h = run_decoder_stack(p.layers, p.final_norm, detail::evidence_inputs<S>(p, prev),
                                  enc.states, model.config.n_heads, Dropout<S>{}, nullptr);
  Matrix<S> table = detail::score_table<S>(p, cands);
  return table * h.row(h.rows() - 1).transpose();
}

// Row-wise softmax cross-entropy against targets smoothed with mass
// `smoothing` spread uniformly over all columns; mean over rows. Writes the
// gradient of the mean loss into `dlogits` when given.
template <typename S>
S smoothed_cross_entropy(const Matrix<S>& logits, std::span<const int> targets, S smoothing,
                         Matrix<S>* dlogits) {
  const Eigen::Index rows = logits.rows();
  const Eigen::Index cols = logits.cols();
  const S uniform = smoothing / static_cast<S>(cols);
  S total = 0;
  if (dlogits) dlogits->resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Vector<S> logp = log_softmax<S>(logits.row(r).transpose());
    const int y = targets[r];
    total -= (S(1) - smoothing) * logp(y) + uniform * logp.sum();
    if (dlogits) {
      auto d = dlogits->row(r);
      d = logp.array().exp().matrix().transpose();
      d.array() -= uniform;
      d(y) -= S(1) - smoothing;
    }
  }
  if (dlogits) *dlogits /= static_cast<S>(rows);
  return total / static_cast<S>(rows);
}

// Teacher-forced, label-smoothed title loss. `gold` is the full linearized
// target BOS t1 EOT SEP t2 EOT ... EOS.
template <typename S>
S loss_title(const Model<S>& model, const ClaimEncoding<S>& enc, TokenSpan gold) {
  if (gold.size() < 2) throw std::invalid_argument("loss_title: target needs at least two tokens");
  detail::check_tokens(gold, model.config.vocab_size, "loss_title");
  const auto& p = model.params.title_decoder;
  Matrix<S> h = run_decoder_stack(p.layers, p.final_norm, embed_title_prefix(p, gold.first(gold.size() - 1)),
                                  enc.states, model.config.n_heads, Dropout<S>{}, nullptr);
  Matrix<S> logits = linear(p.output, h);
  std::vector<int> targets(gold.begin() + 1, gold.end());
  return smoothed_cross_entropy<S>(logits, targets, static_cast<S>(model.config.label_smoothing), nullptr);
}

// Mean cross-entropy of the gold identifier sequence followed by EOE over
// the dynamic vocabulary [candidates..., EOE]. No label smoothing.
template <typename S>
S loss_evidence(const Model<S>& model, const ClaimEncoding<S>& enc, std::span<const EvidenceId> gold,
                std::span<const SentenceEmbedding<S>> candidates) {
  if (candidates.empty()) throw std::invalid_argument("loss_evidence: no candidates");
  std::vector<int> targets;
  std::vector<const Vector<S>*> previous;
  for (const auto& id : gold) {
    auto it = std::find_if(candidates.begin(), candidates.end(),
                           [&](const SentenceEmbedding<S>& c) { return c.source == id; });
    if (it == candidates.end()) {
      throw DataError("gold evidence (" + id.doc_id + ", " + std::to_string(id.sentence_index) +
                      ") is not among the candidates");
    }
    targets.push_back(static_cast<int>(it - candidates.begin()));
    previous.push_back(&it->vector);
  }
  targets.push_back(static_cast<int>(candidates.size()));
  const auto& p = model.params.evidence_decoder;
  Matrix<S> h = run_decoder_stack(p.layers, p.final_norm, detail::evidence_inputs<S>(p, previous),
                                  enc.states, model.config.n_heads, Dropout<S>{}, nullptr);
  auto cands = detail::vectors_of(candidates);
  Matrix<S> scores = h * detail::score_table<S>(p, cands).transpose();
  return smoothed_cross_entropy<S>(scores, targets, S(0), nullptr);
}

// ---------------------------------------------------------------------------
// Incremental title decoding with cached self-attention keys and values.

template <typename S>
struct CrossMemory {
  std::vector<Matrix<S>> keys;    // per layer
  std::vector<Matrix<S>> values;  // per layer
};

template <typename S>
struct TitleDecoderState {
  std::vector<Matrix<S>> keys;    // per layer, one row per consumed token
  std::vector<Matrix<S>> values;
  int length = 0;
};

template <typename S>
CrossMemory<S> precompute_cross_memory(const Model<S>& model, const ClaimEncoding<S>& enc) {
  CrossMemory<S> memory;
  for (const auto& layer : model.params.title_decoder.layers) {
    memory.keys.push_back(linear(layer.cross_attention.key, enc.states));
    memory.values.push_back(linear(layer.cross_attention.value, enc.states));
  }
  return memory;
}

namespace detail {

// Single-query multi-head attention over precomputed keys and values.
template <typename S>
Matrix<S> attend(const Matrix<S>& q, const Matrix<S>& keys, const Matrix<S>& values, int heads) {
  const Eigen::Index d = q.cols();
  const Eigen::Index dh = d / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  Matrix<S> context(q.rows(), d);
  for (int h = 0; h < heads; ++h) {
    Matrix<S> scores = (q.middleCols(h * dh, dh) * keys.middleCols(h * dh, dh).transpose()) * scale;
    softmax_rows(scores);
    context.middleCols(h * dh, dh).noalias() = scores * values.middleCols(h * dh, dh);
  }
  return context;
}

}  // namespace detail

template <typename S>
TitleDecoderState<S> start_title_state(const Model<S>& model) {
  TitleDecoderState<S> state;
  state.keys.assign(model.params.title_decoder.layers.size(), Matrix<S>(0, model.config.d_model));
  state.values = state.keys;
  return state;
}

// Consumes `token` at the next position and returns the logits for the
// following token. Matches decode_step_title on the same prefix up to
// floating-point reassociation.
template <typename S>
Vector<S> title_decoder_step(const Model<S>& model, const CrossMemory<S>& memory,
                             TitleDecoderState<S>& state, TokenId token) {
  const auto& p = model.params.title_decoder;
  if (state.length >= model.config.max_positions) {
    throw std::invalid_argument("title_decoder_step: exceeded max_positions");
  }
  const int heads = model.config.n_heads;
  Matrix<S> x = p.token_embedding.row(token) + p.position_embedding.row(state.length);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    Matrix<S> a = layer_norm(layer.self_norm, x, nullptr);
    auto& keys = state.keys[l];
    auto& values = state.values[l];
    keys.conservativeResize(keys.rows() + 1, Eigen::NoChange);
    values.conservativeResize(values.rows() + 1, Eigen::NoChange);
    keys.row(keys.rows() - 1) = linear(layer.self_attention.key, a);
    values.row(values.rows() - 1) = linear(layer.self_attention.value, a);
    Matrix<S> q = linear(layer.self_attention.query, a);
    x += linear(layer.self_attention.output, detail::attend(q, keys, values, heads));

    Matrix<S> b = layer_norm(layer.cross_norm, x, nullptr);
    Matrix<S> cq = linear(layer.cross_attention.query, b);
    x += linear(layer.cross_attention.output, detail::attend(cq, memory.keys[l], memory.values[l], heads));

    Matrix<S> f = layer_norm(layer.ffn_norm, x, nullptr);
    x += feed_forward(layer.ffn, f, nullptr);
  }
  ++state.length;
  Matrix<S> h = layer_norm(p.final_norm, x, nullptr);
  return linear(p.output, h).row(0).transpose();
}

}  // namespace gere
