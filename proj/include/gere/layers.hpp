#pragma once

// Dense transformer building blocks with explicit forward caches and
// hand-written backward passes. Everything is templated on the scalar type:
// float for training and inference, double for gradient checking.
//
// Shapes: activations are row-major (positions x features). A Linear maps
// x (n x in) to x * weight + bias with weight (in x out), bias (1 x out).

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

namespace gere {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kLayerNormEpsilon = 1e-5;

// ---------------------------------------------------------------------------
// Parameters

template <typename S>
struct Linear {
  Matrix<S> weight;
  Matrix<S> bias;
};

template <typename S>
struct LayerNorm {
  Matrix<S> gain;
  Matrix<S> shift;
};

template <typename S>
struct Attention {
  Linear<S> query, key, value, output;
};

template <typename S>
struct FeedForward {
  Linear<S> hidden, output;
};

template <typename S>
struct EncoderLayer {
  LayerNorm<S> attention_norm;
  Attention<S> attention;
  LayerNorm<S> ffn_norm;
  FeedForward<S> ffn;
};

template <typename S>
struct DecoderLayer {
  LayerNorm<S> self_norm;
  Attention<S> self_attention;
  LayerNorm<S> cross_norm;
  Attention<S> cross_attention;
  LayerNorm<S> ffn_norm;
  FeedForward<S> ffn;
};

// Tensor visitation. `f` is called as f(name, Matrix<S>&).

template <typename S, typename F>
void visit(Linear<S>& p, const std::string& prefix, F& f) {
  f(prefix + ".weight", p.weight);
  f(prefix + ".bias", p.bias);
}

template <typename S, typename F>
void visit(LayerNorm<S>& p, const std::string& prefix, F& f) {
  f(prefix + ".gain", p.gain);
  f(prefix + ".shift", p.shift);
}

template <typename S, typename F>
void visit(Attention<S>& p, const std::string& prefix, F& f) {
  visit(p.query, prefix + ".query", f);
  visit(p.key, prefix + ".key", f);
  visit(p.value, prefix + ".value", f);
  visit(p.output, prefix + ".output", f);
}

template <typename S, typename F>
void visit(FeedForward<S>& p, const std::string& prefix, F& f) {
  visit(p.hidden, prefix + ".hidden", f);
  visit(p.output, prefix + ".output", f);
}

template <typename S, typename F>
void visit(EncoderLayer<S>& p, const std::string& prefix, F& f) {
  visit(p.attention_norm, prefix + ".attention_norm", f);
  visit(p.attention, prefix + ".attention", f);
  visit(p.ffn_norm, prefix + ".ffn_norm", f);
  visit(p.ffn, prefix + ".ffn", f);
}

template <typename S, typename F>
void visit(DecoderLayer<S>& p, const std::string& prefix, F& f) {
  visit(p.self_norm, prefix + ".self_norm", f);
  visit(p.self_attention, prefix + ".self_attention", f);
  visit(p.cross_norm, prefix + ".cross_norm", f);
  visit(p.cross_attention, prefix + ".cross_attention", f);
  visit(p.ffn_norm, prefix + ".ffn_norm", f);
  visit(p.ffn, prefix + ".ffn", f);
}

// ---------------------------------------------------------------------------
// Initialization

template <typename S>
Matrix<S> gaussian(Eigen::Index rows, Eigen::Index cols, double stddev,
                   std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix<S> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(normal(rng));
  return m;
}

template <typename S>
Linear<S> make_linear(int in, int out, double scale, std::mt19937_64& rng) {
  return {gaussian<S>(in, out, scale / std::sqrt(static_cast<double>(in)), rng),
          Matrix<S>::Zero(1, out)};
}

template <typename S>
LayerNorm<S> make_layer_norm(int width) {
  return {Matrix<S>::Ones(1, width), Matrix<S>::Zero(1, width)};
}

template <typename S>
Attention<S> make_attention(int d, double scale, std::mt19937_64& rng) {
  return {make_linear<S>(d, d, scale, rng), make_linear<S>(d, d, scale, rng),
          make_linear<S>(d, d, scale, rng), make_linear<S>(d, d, scale, rng)};
}

template <typename S>
FeedForward<S> make_feed_forward(int d, int d_ff, double scale, std::mt19937_64& rng) {
  return {make_linear<S>(d, d_ff, scale, rng), make_linear<S>(d_ff, d, scale, rng)};
}

// ---------------------------------------------------------------------------
// Elementwise helpers

template <typename S>
void softmax_rows(Matrix<S>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
}

template <typename S>
Vector<S> log_softmax(const Vector<S>& logits) {
  const S max = logits.maxCoeff();
  const S log_sum = std::log((logits.array() - max).exp().sum()) + max;
  return (logits.array() - log_sum).matrix();
}

template <typename S>
Vector<S> softmax(const Vector<S>& logits) {
  Vector<S> p = (logits.array() - logits.maxCoeff()).exp().matrix();
  return p / p.sum();
}

// tanh approximation of GELU; smooth, which keeps finite-difference checks
// meaningful.
template <typename S>
S gelu(S x) {
  constexpr S kC = static_cast<S>(0.7978845608028654);  // sqrt(2 / pi)
  constexpr S kA = static_cast<S>(0.044715);
  return S(0.5) * x * (S(1) + std::tanh(kC * (x + kA * x * x * x)));
}

template <typename S>
S gelu_derivative(S x) {
  constexpr S kC = static_cast<S>(0.7978845608028654);
  constexpr S kA = static_cast<S>(0.044715);
  const S t = std::tanh(kC * (x + kA * x * x * x));
  return S(0.5) * (S(1) + t) + S(0.5) * x * (S(1) - t * t) * kC * (S(1) + S(3) * kA * x * x);
}

// ---------------------------------------------------------------------------
// Dropout

template <typename S>
struct Dropout {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
  bool active() const { return rng != nullptr && rate > 0.0; }
};

// Returns x with dropout applied. `mask` receives the keep/scale mask, or is
// left empty when dropout is inactive.
template <typename S>
Matrix<S> apply_dropout(Matrix<S> x, const Dropout<S>& dropout, Matrix<S>* mask) {
  if (!dropout.active()) {
    if (mask) mask->resize(0, 0);
    return x;
  }
  const S keep_scale = static_cast<S>(1.0 / (1.0 - dropout.rate));
  Matrix<S> m(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double u = static_cast<double>((*dropout.rng)() >> 11) * 0x1.0p-53;
    m.data()[i] = u < dropout.rate ? S(0) : keep_scale;
  }
  x.array() *= m.array();
  if (mask) *mask = std::move(m);
  return x;
}

template <typename S>
Matrix<S> dropout_backward(const Matrix<S>& mask, Matrix<S> grad) {
  if (mask.size() != 0) grad.array() *= mask.array();
  return grad;
}

// ---------------------------------------------------------------------------
// Linear

template <typename S>
Matrix<S> linear(const Linear<S>& p, const Matrix<S>& x) {
  Matrix<S> y = x * p.weight;
  y.rowwise() += p.bias.row(0);
  return y;
}

// Accumulates parameter gradients into `g`; returns the input gradient.
template <typename S>
Matrix<S> linear_backward(const Linear<S>& p, Linear<S>& g, const Matrix<S>& x,
                          const Matrix<S>& dy) {
  g.weight.noalias() += x.transpose() * dy;
  g.bias += dy.colwise().sum();
  return dy * p.weight.transpose();
}

// ---------------------------------------------------------------------------
// LayerNorm

template <typename S>
struct LayerNormCache {
  Matrix<S> normalized;
  Vector<S> inv_std;
};

template <typename S>
Matrix<S> layer_norm(const LayerNorm<S>& p, const Matrix<S>& x, std::type_identity_t<LayerNormCache<S>>* cache) {
  Matrix<S> normalized(x.rows(), x.cols());
  Vector<S> inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const S mean = x.row(r).mean();
    auto centered = (x.row(r).array() - mean).eval();
    const S variance = centered.square().mean();
    inv_std(r) = S(1) / std::sqrt(variance + static_cast<S>(kLayerNormEpsilon));
    normalized.row(r) = centered * inv_std(r);
  }
  Matrix<S> y = ((normalized.array().rowwise() * p.gain.row(0).array()).rowwise() +
                 p.shift.row(0).array())
                    .matrix();
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename S>
Matrix<S> layer_norm_backward(const LayerNorm<S>& p, LayerNorm<S>& g,
                              const LayerNormCache<S>& c, const Matrix<S>& dy) {
  g.gain += (dy.array() * c.normalized.array()).colwise().sum().matrix();
  g.shift += dy.colwise().sum();
  Matrix<S> dnorm = (dy.array().rowwise() * p.gain.row(0).array()).matrix();
  Matrix<S> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const S mean_d = dnorm.row(r).mean();
    const S mean_dx = (dnorm.row(r).array() * c.normalized.row(r).array()).mean();
    dx.row(r) = c.inv_std(r) *
                (dnorm.row(r).array() - mean_d - c.normalized.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Multi-head attention

template <typename S>
struct AttentionCache {
  Matrix<S> input;
  Matrix<S> memory;
  Matrix<S> q, k, v;
  Matrix<S> context;
  std::vector<Matrix<S>> probs;  // per head, (queries x keys)
};

// Queries come from `x`, keys and values from `memory`. With `causal`, query
// i may only attend to keys 0..i (x and memory then have equal length).
template <typename S>
Matrix<S> attention(const Attention<S>& p, const Matrix<S>& x, const Matrix<S>& memory,
                    int heads, bool causal, std::type_identity_t<AttentionCache<S>>* cache) {
  Matrix<S> q = linear(p.query, x);
  Matrix<S> k = linear(p.key, memory);
  Matrix<S> v = linear(p.value, memory);
  const Eigen::Index d = q.cols();
  const Eigen::Index dh = d / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));

  Matrix<S> context(x.rows(), d);
  if (cache) cache->probs.clear();
  for (int h = 0; h < heads; ++h) {
    Matrix<S> scores = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
    if (causal) {
      for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < scores.cols(); ++j) {
          scores(i, j) = -std::numeric_limits<S>::infinity();
        }
      }
    }
    softmax_rows(scores);
    context.middleCols(h * dh, dh).noalias() = scores * v.middleCols(h * dh, dh);
    if (cache) cache->probs.push_back(std::move(scores));
  }
  Matrix<S> out = linear(p.output, context);
  if (cache) {
    cache->input = x;
    cache->memory = memory;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->context = std::move(context);
  }
  return out;
}

template <typename S>
struct AttentionGrads {
  Matrix<S> input;
  Matrix<S> memory;
};

template <typename S>
AttentionGrads<S> attention_backward(const Attention<S>& p, Attention<S>& g,
                                     const AttentionCache<S>& c, int heads,
                                     const Matrix<S>& dout) {
  Matrix<S> dcontext = linear_backward(p.output, g.output, c.context, dout);
  const Eigen::Index d = c.q.cols();
  const Eigen::Index dh = d / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));

  Matrix<S> dq(c.q.rows(), d), dk(c.k.rows(), d), dv(c.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Matrix<S>& probs = c.probs[h];
    auto dctx = dcontext.middleCols(h * dh, dh);
    dv.middleCols(h * dh, dh).noalias() = probs.transpose() * dctx;
    Matrix<S> dprobs = dctx * c.v.middleCols(h * dh, dh).transpose();
    Vector<S> row_dot = (dprobs.array() * probs.array()).rowwise().sum().matrix();
    Matrix<S> dscores =
        (probs.array() * (dprobs.colwise() - row_dot).array()).matrix() * scale;
    dq.middleCols(h * dh, dh).noalias() = dscores * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh).noalias() = dscores.transpose() * c.q.middleCols(h * dh, dh);
  }
  AttentionGrads<S> grads;
  grads.input = linear_backward(p.query, g.query, c.input, dq);
  grads.memory = linear_backward(p.key, g.key, c.memory, dk);
  grads.memory += linear_backward(p.value, g.value, c.memory, dv);
  return grads;
}

// ---------------------------------------------------------------------------
// Position-wise feed-forward

template <typename S>
struct FeedForwardCache {
  Matrix<S> input;
  Matrix<S> pre_activation;
  Matrix<S> activation;
};

template <typename S>
Matrix<S> feed_forward(const FeedForward<S>& p, const Matrix<S>& x, std::type_identity_t<FeedForwardCache<S>>* cache) {
  Matrix<S> pre = linear(p.hidden, x);
  Matrix<S> act = pre.unaryExpr([](S v) { return gelu(v); });
  Matrix<S> out = linear(p.output, act);
  if (cache) {
    cache->input = x;
    cache->pre_activation = std::move(pre);
    cache->activation = std::move(act);
  }
  return out;
}

template <typename S>
Matrix<S> feed_forward_backward(const FeedForward<S>& p, FeedForward<S>& g,
                                const FeedForwardCache<S>& c, const Matrix<S>& dout) {
  Matrix<S> dact = linear_backward(p.output, g.output, c.activation, dout);
  dact.array() *= c.pre_activation.unaryExpr([](S v) { return gelu_derivative(v); }).array();
  return linear_backward(p.hidden, g.hidden, c.input, dact);
}

// ---------------------------------------------------------------------------
// Pre-norm transformer layers

template <typename S>
struct EncoderLayerCache {
  LayerNormCache<S> attention_norm;
  AttentionCache<S> attention;
  Matrix<S> attention_mask;
  LayerNormCache<S> ffn_norm;
  FeedForwardCache<S> ffn;
  Matrix<S> ffn_mask;
};

template <typename S>
Matrix<S> encoder_layer(const EncoderLayer<S>& p, Matrix<S> x, int heads,
                        const Dropout<S>& dropout, std::type_identity_t<EncoderLayerCache<S>>* c) {
  Matrix<S> a = layer_norm(p.attention_norm, x, c ? &c->attention_norm : nullptr);
  x += apply_dropout(attention(p.attention, a, a, heads, false, c ? &c->attention : nullptr),
                     dropout, c ? &c->attention_mask : nullptr);
  Matrix<S> b = layer_norm(p.ffn_norm, x, c ? &c->ffn_norm : nullptr);
  x += apply_dropout(feed_forward(p.ffn, b, c ? &c->ffn : nullptr), dropout,
                     c ? &c->ffn_mask : nullptr);
  return x;
}

template <typename S>
Matrix<S> encoder_layer_backward(const EncoderLayer<S>& p, EncoderLayer<S>& g,
                                 const EncoderLayerCache<S>& c, int heads, Matrix<S> dx) {
  Matrix<S> dffn = feed_forward_backward(p.ffn, g.ffn, c.ffn, dropout_backward(c.ffn_mask, dx));
  dx += layer_norm_backward(p.ffn_norm, g.ffn_norm, c.ffn_norm, dffn);
  auto da = attention_backward(p.attention, g.attention, c.attention, heads,
                               dropout_backward(c.attention_mask, dx));
  Matrix<S> dnormed = da.input + da.memory;
  dx += layer_norm_backward(p.attention_norm, g.attention_norm, c.attention_norm, dnormed);
  return dx;
}

template <typename S>
struct DecoderLayerCache {
  LayerNormCache<S> self_norm;
  AttentionCache<S> self_attention;
  Matrix<S> self_mask;
  LayerNormCache<S> cross_norm;
  AttentionCache<S> cross_attention;
  Matrix<S> cross_mask;
  LayerNormCache<S> ffn_norm;
  FeedForwardCache<S> ffn;
  Matrix<S> ffn_mask;
};

template <typename S>
Matrix<S> decoder_layer(const DecoderLayer<S>& p, Matrix<S> x, const Matrix<S>& memory,
                        int heads, const Dropout<S>& dropout, std::type_identity_t<DecoderLayerCache<S>>* c) {
  Matrix<S> a = layer_norm(p.self_norm, x, c ? &c->self_norm : nullptr);
  x += apply_dropout(
      attention(p.self_attention, a, a, heads, true, c ? &c->self_attention : nullptr),
      dropout, c ? &c->self_mask : nullptr);
  Matrix<S> b = layer_norm(p.cross_norm, x, c ? &c->cross_norm : nullptr);
  x += apply_dropout(attention(p.cross_attention, b, memory, heads, false,
                               c ? &c->cross_attention : nullptr),
                     dropout, c ? &c->cross_mask : nullptr);
  Matrix<S> f = layer_norm(p.ffn_norm, x, c ? &c->ffn_norm : nullptr);
  x += apply_dropout(feed_forward(p.ffn, f, c ? &c->ffn : nullptr), dropout,
                     c ? &c->ffn_mask : nullptr);
  return x;
}

// Returns the input gradient; adds the memory gradient into `dmemory`.
template <typename S>
Matrix<S> decoder_layer_backward(const DecoderLayer<S>& p, DecoderLayer<S>& g,
                                 const DecoderLayerCache<S>& c, int heads, Matrix<S> dx,
                                 Matrix<S>& dmemory) {
  Matrix<S> dffn = feed_forward_backward(p.ffn, g.ffn, c.ffn, dropout_backward(c.ffn_mask, dx));
  dx += layer_norm_backward(p.ffn_norm, g.ffn_norm, c.ffn_norm, dffn);

  auto dcross = attention_backward(p.cross_attention, g.cross_attention, c.cross_attention,
                                   heads, dropout_backward(c.cross_mask, dx));
  dmemory += dcross.memory;
  dx += layer_norm_backward(p.cross_norm, g.cross_norm, c.cross_norm, dcross.input);

  auto dself = attention_backward(p.self_attention, g.self_attention, c.self_attention, heads,
                                  dropout_backward(c.self_mask, dx));
  Matrix<S> dnormed = dself.input + dself.memory;
  dx += layer_norm_backward(p.self_norm, g.self_norm, c.self_norm, dnormed);
  return dx;
}

}  // namespace gere
