#pragma once

// Joint training: L_total = L_title + L_evidence with teacher forcing, Adam,
// linear warmup then linear decay, and global-norm gradient clipping.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "gere/model.hpp"
#include "gere/training_data.hpp"

namespace gere {

template <typename S>
struct ExampleLoss {
  S title = 0;
  S evidence = 0;
  S total() const { return title + evidence; }
};

// Forward pass over one example; with `grads` also runs the backward pass and
// accumulates grad_scale * dL_total/dθ into it.
template <typename S>
ExampleLoss<S> forward_backward(const Model<S>& model, const TrainingExample& ex,
                                ModelParams<S>* grads, S grad_scale = S(1),
                                std::mt19937_64* dropout_rng = nullptr) {
  const ModelConfig& cfg = model.config;
  const ModelParams<S>& p = model.params;
  const int heads = cfg.n_heads;
  const Dropout<S> dropout{cfg.dropout_rate, dropout_rng};
  const bool backward = grads != nullptr;

  if (ex.evidence_target.empty()) {
    throw DataError("claim " + std::to_string(ex.claim_id) +
                    " has no gold evidence; NOT ENOUGH INFO claims cannot be trained on");
  }
  if (ex.candidate_tokens.empty()) throw DataError("training example without candidates");

  // Claim encoder.
  EncoderCache<S> claim_cache;
  Matrix<S> memory = run_encoder(p.claim_encoder, cfg, ex.claim, dropout,
                                 backward ? &claim_cache : nullptr);

  // Title decoder.
  const auto& td = p.title_decoder;
  TokenSpan title(ex.title_target);
  TokenSpan title_in = title.first(title.size() - 1);
  DecoderStackCache<S> title_cache;
  Matrix<S> title_hidden = run_decoder_stack(td.layers, td.final_norm, embed_title_prefix(td, title_in),
                                             memory, heads, dropout,
                                             backward ? &title_cache : nullptr);
  Matrix<S> logits = linear(td.output, title_hidden);
  std::vector<int> title_targets(title.begin() + 1, title.end());
  Matrix<S> dlogits;
  ExampleLoss<S> loss;
  loss.title = smoothed_cross_entropy<S>(logits, title_targets, static_cast<S>(cfg.label_smoothing),
                                         backward ? &dlogits : nullptr);

  // Sentence encoder over every candidate.
  const std::size_t n_cand = ex.candidate_tokens.size();
  std::vector<EncoderCache<S>> sentence_caches(backward ? n_cand : 0);
  std::vector<Vector<S>> embeddings(n_cand);
  std::vector<Eigen::Index> sentence_lengths(n_cand);
  static constexpr TokenId kEmpty[] = {kEos};
  for (std::size_t i = 0; i < n_cand; ++i) {
    TokenSpan tokens = ex.candidate_tokens[i].empty() ? TokenSpan(kEmpty) : TokenSpan(ex.candidate_tokens[i]);
    Matrix<S> states = run_encoder(p.sentence_encoder, cfg, tokens, dropout,
                                   backward ? &sentence_caches[i] : nullptr);
    sentence_lengths[i] = states.rows();
    embeddings[i] = states.colwise().mean().transpose();
  }

  // Evidence decoder.
  const auto& ed = p.evidence_decoder;
  std::vector<const Vector<S>*> previous;
  std::vector<const Vector<S>*> candidates;
  for (int idx : ex.evidence_target) previous.push_back(&embeddings.at(static_cast<std::size_t>(idx)));
  for (const auto& e : embeddings) candidates.push_back(&e);
  DecoderStackCache<S> evidence_cache;
  Matrix<S> evidence_hidden =
      run_decoder_stack(ed.layers, ed.final_norm, detail::evidence_inputs<S>(ed, previous), memory,
                        heads, dropout, backward ? &evidence_cache : nullptr);
  Matrix<S> table = detail::score_table<S>(ed, candidates);
  Matrix<S> scores = evidence_hidden * table.transpose();
  std::vector<int> evidence_targets = ex.evidence_target;
  evidence_targets.push_back(static_cast<int>(n_cand));
  Matrix<S> dscores;
  loss.evidence = smoothed_cross_entropy<S>(scores, evidence_targets, S(0), backward ? &dscores : nullptr);

  if (!backward) return loss;
  ModelParams<S>& g = *grads;
  dlogits *= grad_scale;
  dscores *= grad_scale;

  Matrix<S> dmemory = Matrix<S>::Zero(memory.rows(), memory.cols());

  // Title decoder backward.
  Matrix<S> dtitle_hidden = linear_backward(td.output, g.title_decoder.output, title_hidden, dlogits);
  Matrix<S> dtitle_in = run_decoder_stack_backward(td.layers, g.title_decoder.layers, td.final_norm,
                                                   g.title_decoder.final_norm, title_cache, heads,
                                                   dtitle_hidden, dmemory);
  for (Eigen::Index t = 0; t < dtitle_in.rows(); ++t) {
    g.title_decoder.token_embedding.row(title_in[t]) += dtitle_in.row(t);
    g.title_decoder.position_embedding.row(t) += dtitle_in.row(t);
  }

  // Evidence decoder backward. Candidate embeddings receive gradient both as
  // score-table rows and as decoder inputs.
  Matrix<S> dhidden = dscores * table;
  Matrix<S> dtable = dscores.transpose() * evidence_hidden;
  Matrix<S> dembeddings = dtable.topRows(static_cast<Eigen::Index>(n_cand));
  g.evidence_decoder.end.row(0) += dtable.row(dtable.rows() - 1);
  Matrix<S> devidence_in = run_decoder_stack_backward(ed.layers, g.evidence_decoder.layers, ed.final_norm,
                                                      g.evidence_decoder.final_norm, evidence_cache,
                                                      heads, dhidden, dmemory);
  g.evidence_decoder.position_embedding.topRows(devidence_in.rows()) += devidence_in;
  g.evidence_decoder.start.row(0) += devidence_in.row(0);
  for (std::size_t k = 0; k < ex.evidence_target.size(); ++k) {
    dembeddings.row(ex.evidence_target[k]) += devidence_in.row(static_cast<Eigen::Index>(k) + 1);
  }

  // Sentence encoder backward through mean pooling.
  for (std::size_t i = 0; i < n_cand; ++i) {
    Matrix<S> dstates = (dembeddings.row(static_cast<Eigen::Index>(i)) /
                         static_cast<S>(sentence_lengths[i]))
                            .replicate(sentence_lengths[i], 1);
    run_encoder_backward(p.sentence_encoder, g.sentence_encoder, cfg, sentence_caches[i], dstates);
  }

  run_encoder_backward(p.claim_encoder, g.claim_encoder, cfg, claim_cache, dmemory);
  return loss;
}

// Learning rate after `step` updates have been scheduled: rises linearly to
// `peak` over the first warmup_fraction of total_updates, then decays
// linearly to zero at total_updates.
struct LinearWarmupSchedule {
  double peak = 3e-5;
  std::int64_t total_updates = 1;
  double warmup_fraction = 0.10;

  std::int64_t warmup_updates() const {
    auto w = static_cast<std::int64_t>(std::llround(warmup_fraction * static_cast<double>(total_updates)));
    return std::clamp<std::int64_t>(w, 1, std::max<std::int64_t>(total_updates, 1));
  }

  // `step` is the 1-based index of the update being applied.
  double at(std::int64_t step) const {
    const std::int64_t warmup = warmup_updates();
    if (step <= 0) return 0.0;
    if (step <= warmup) return peak * (static_cast<double>(step) / static_cast<double>(warmup));
    if (step >= total_updates) return 0.0;
    return peak * (static_cast<double>(total_updates - step) /
                   static_cast<double>(total_updates - warmup));
  }
};

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;
};

template <typename S>
struct AdamState {
  ModelParams<S> first_moment;
  ModelParams<S> second_moment;
  std::int64_t step = 0;  // completed updates
};

template <typename S>
AdamState<S> make_adam_state(const Model<S>& model) {
  return {zeros_like(model.params), zeros_like(model.params), 0};
}

struct TrainStats {
  std::int64_t step = 0;
  double loss_title = 0;
  double loss_evidence = 0;
  double loss_total = 0;
  double grad_norm = 0;  // before clipping
  double learning_rate = 0;
  std::size_t batch_size = 0;
};

template <typename S>
double global_norm(const ModelParams<S>& grads) {
  double sq = 0;
  for (const auto& [name, m] : named_tensors(grads)) sq += m->template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

// One Adam update on the batch-mean L_total. Per-example dropout streams are
// derived from (seed, step, position in batch) so runs are reproducible.
template <typename S>
TrainStats train_step(Model<S>& model, AdamState<S>& state,
                      std::span<const TrainingExample* const> batch,
                      const LinearWarmupSchedule& schedule, const OptimizerConfig& opt,
                      std::uint64_t seed) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  for (const auto* ex : batch) {
    if (ex->evidence_target.empty()) {
      throw DataError("train_step: claim " + std::to_string(ex->claim_id) +
                      " is not verifiable (no gold evidence)");
    }
  }

  ModelParams<S> grads = zeros_like(model.params);
  const S scale = S(1) / static_cast<S>(batch.size());
  const std::int64_t step = state.step + 1;
  double title_sum = 0, evidence_sum = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    auto loss = forward_backward(model, *batch[i], &grads, scale, &rng);
    title_sum += static_cast<double>(loss.title);
    evidence_sum += static_cast<double>(loss.evidence);
  }

  TrainStats stats;
  stats.step = step;
  stats.batch_size = batch.size();
  stats.loss_title = title_sum / static_cast<double>(batch.size());
  stats.loss_evidence = evidence_sum / static_cast<double>(batch.size());
  stats.loss_total = stats.loss_title + stats.loss_evidence;
  stats.grad_norm = global_norm(grads);
  stats.learning_rate = schedule.at(step);

  const double clip = stats.grad_norm > opt.clip_norm ? opt.clip_norm / stats.grad_norm : 1.0;
  const double bias1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
  const double bias2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
  const S lr = static_cast<S>(stats.learning_rate);
  const S b1 = static_cast<S>(opt.beta1), b2 = static_cast<S>(opt.beta2);
  const S c1 = static_cast<S>(1.0 / bias1), c2 = static_cast<S>(1.0 / bias2);
  const S eps = static_cast<S>(opt.epsilon);
  const S clip_s = static_cast<S>(clip);

  auto params = named_tensors(model.params);
  auto g = named_tensors(grads);
  auto m = named_tensors(state.first_moment);
  auto v = named_tensors(state.second_moment);
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto grad = (g[t].second->array() * clip_s).eval();
    auto& m1 = *m[t].second;
    auto& m2 = *v[t].second;
    m1.array() = b1 * m1.array() + (S(1) - b1) * grad;
    m2.array() = b2 * m2.array() + (S(1) - b2) * grad.square();
    params[t].second->array() -= lr * (m1.array() * c1) / ((m2.array() * c2).sqrt() + eps);
  }
  state.step = step;
  return stats;
}

}  // namespace gere
