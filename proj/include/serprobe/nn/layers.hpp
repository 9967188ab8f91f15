#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "serprobe/types.hpp"

// Differentiable building blocks. Sequences are T x D matrices with one frame
// per row; every forward op has a matching *_backward that maps the gradient
// of the loss w.r.t. the op's output onto its inputs and parameters.
namespace serprobe::nn {

class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kMinAlphaSum = 1e-6;

// ---------------------------------------------------------------------------
// Trainable weighted layer aggregation: out = sum_i alpha_i f_i / sum_i alpha_i
// over every stream, including index 0 (the local encoder output).

template <typename S>
S alpha_sum(const Vector<S>& alpha) {
  const S sum = alpha.sum();
  if (!(std::abs(static_cast<double>(sum)) >= kMinAlphaSum)) {
    throw DegenerateWeightsError("aggregation weights sum to " +
                                 std::to_string(static_cast<double>(sum)) +
                                 ", below the 1e-6 threshold");
  }
  return sum;
}

template <typename S>
Matrix<S> weighted_aggregate(std::span<const Matrix<S>> layers, const Vector<S>& alpha) {
  if (layers.empty() || static_cast<Eigen::Index>(layers.size()) != alpha.size()) {
    throw ShapeError("weighted_aggregate: " + std::to_string(layers.size()) + " layers but " +
                     std::to_string(alpha.size()) + " weights");
  }
  const S denom = alpha_sum(alpha);
  Matrix<S> out = alpha[0] * layers[0];
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i].rows() != out.rows() || layers[i].cols() != out.cols()) {
      throw ShapeError("weighted_aggregate: layer " + std::to_string(i) + " has a different shape");
    }
    out.noalias() += alpha[static_cast<Eigen::Index>(i)] * layers[i];
  }
  return out / denom;
}

template <typename S>
Matrix<S> weighted_aggregate(const std::vector<Matrix<S>>& layers, const Vector<S>& alpha) {
  return weighted_aggregate(std::span<const Matrix<S>>(layers), alpha);
}

// d out / d alpha_i = (f_i - out) / sum(alpha)
template <typename S>
Vector<S> weighted_aggregate_alpha_grad(std::span<const Matrix<S>> layers, const Vector<S>& alpha,
                                        const Matrix<S>& out, const Matrix<S>& d_out) {
  const S denom = alpha_sum(alpha);
  Vector<S> d_alpha(alpha.size());
  const S projected = (out.array() * d_out.array()).sum();
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    d_alpha[i] = ((layers[static_cast<std::size_t>(i)].array() * d_out.array()).sum() - projected) / denom;
  }
  return d_alpha;
}

template <typename S>
struct AggregateGrad {
  Vector<S> d_alpha;
  std::vector<Matrix<S>> d_layers;
};

template <typename S>
AggregateGrad<S> weighted_aggregate_backward(std::span<const Matrix<S>> layers,
                                             const Vector<S>& alpha, const Matrix<S>& d_out) {
  const Matrix<S> out = weighted_aggregate(layers, alpha);
  AggregateGrad<S> g;
  g.d_alpha = weighted_aggregate_alpha_grad(layers, alpha, out, d_out);
  const S denom = alpha.sum();
  for (Eigen::Index i = 0; i < alpha.size(); ++i) g.d_layers.push_back((alpha[i] / denom) * d_out);
  return g;
}

template <typename S>
AggregateGrad<S> weighted_aggregate_backward(const std::vector<Matrix<S>>& layers,
                                             const Vector<S>& alpha, const Matrix<S>& d_out) {
  return weighted_aggregate_backward(std::span<const Matrix<S>>(layers), alpha, d_out);
}

// ---------------------------------------------------------------------------
// Frame-wise affine map (a kernel-size-1 convolution): out[t] = seq[t] W + b.
// bias is a 1 x Dout matrix.

template <typename S>
Matrix<S> pointwise_dense(const Matrix<S>& seq, const Matrix<S>& weight, const Matrix<S>& bias) {
  if (seq.cols() != weight.rows() || bias.rows() != 1 || bias.cols() != weight.cols()) {
    throw ShapeError("pointwise_dense: input " + std::to_string(seq.cols()) + " cols, weight " +
                     std::to_string(weight.rows()) + "x" + std::to_string(weight.cols()) +
                     ", bias " + std::to_string(bias.rows()) + "x" + std::to_string(bias.cols()));
  }
  Matrix<S> out = seq * weight;
  out.rowwise() += bias.row(0);
  return out;
}

template <typename S>
struct DenseGrad {
  Matrix<S> d_input;
  Matrix<S> d_weight;
  Matrix<S> d_bias;
};

template <typename S>
DenseGrad<S> pointwise_dense_backward(const Matrix<S>& seq, const Matrix<S>& weight,
                                      const Matrix<S>& d_out) {
  DenseGrad<S> g;
  g.d_input = d_out * weight.transpose();
  g.d_weight = seq.transpose() * d_out;
  g.d_bias = d_out.colwise().sum();
  return g;
}

// ---------------------------------------------------------------------------
// ReLU followed by inverted dropout. `scale` holds 0 for dropped units and
// 1/(1-p) for kept ones; in eval mode it is all ones.

template <typename S>
struct Activation {
  Matrix<S> output;
  Matrix<S> scale;
};

template <typename S, typename Rng>
Matrix<S> dropout_scale(Eigen::Index rows, Eigen::Index cols, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw Error("dropout probability must be in [0, 1)");
  if (!training || p == 0.0) return Matrix<S>::Ones(rows, cols);
  Matrix<S> scale(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const S kept = static_cast<S>(1.0 / (1.0 - p));
  // Row-major draw order so a frame's mask does not depend on sequence length.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) scale(r, c) = keep(rng) ? kept : S(0);
  }
  return scale;
}

template <typename S, typename Rng>
Activation<S> dropout(const Matrix<S>& x, double p, bool training, Rng& rng) {
  Activation<S> a;
  a.scale = dropout_scale<S>(x.rows(), x.cols(), p, training, rng);
  a.output = x.cwiseProduct(a.scale);
  return a;
}

template <typename S>
Matrix<S> dropout_backward(const Matrix<S>& scale, const Matrix<S>& d_out) {
  return d_out.cwiseProduct(scale);
}

template <typename S, typename Rng>
Activation<S> relu_dropout(const Matrix<S>& x, double p, bool training, Rng& rng) {
  Activation<S> a;
  a.scale = dropout_scale<S>(x.rows(), x.cols(), p, training, rng);
  a.output = x.cwiseMax(S(0)).cwiseProduct(a.scale);
  return a;
}

// x is the pre-activation input of relu_dropout.
template <typename S>
Matrix<S> relu_dropout_backward(const Matrix<S>& x, const Matrix<S>& scale, const Matrix<S>& d_out) {
  return (x.array() > S(0)).select(d_out.cwiseProduct(scale), Matrix<S>::Zero(x.rows(), x.cols()));
}

// ---------------------------------------------------------------------------
// Mean over frames whose mask entry is 1.

template <typename S>
RowVector<S> masked_mean_pool(const Matrix<S>& seq, const Vector<S>& mask) {
  if (mask.size() != seq.rows()) throw ShapeError("masked_mean_pool: mask length mismatch");
  const S count = mask.sum();
  if (!(count >= S(1))) throw ShapeError("masked_mean_pool: sequence has no valid frames");
  return (mask.transpose() * seq) / count;
}

template <typename S>
Matrix<S> masked_mean_pool_backward(const Vector<S>& mask, const RowVector<S>& d_out) {
  return (mask / mask.sum()) * d_out;
}

// ---------------------------------------------------------------------------
// Softmax with cross-entropy. d loss / d logits = probs - onehot(label).

template <typename S>
struct SoftmaxXent {
  S loss;
  RowVector<S> probs;
};

template <typename S>
RowVector<S> softmax(const RowVector<S>& logits) {
  RowVector<S> z = (logits.array() - logits.maxCoeff()).exp();
  return z / z.sum();
}

template <typename S>
SoftmaxXent<S> softmax_xent(const RowVector<S>& logits, int label) {
  if (label < 0 || label >= logits.size()) {
    throw Error("softmax_xent: label " + std::to_string(label) + " outside [0, " +
                std::to_string(logits.size()) + ")");
  }
  const S shift = logits.maxCoeff();
  const auto shifted = (logits.array() - shift).eval();
  const S log_norm = std::log(shifted.exp().sum());
  SoftmaxXent<S> r;
  r.probs = (shifted - log_norm).exp().matrix();
  r.loss = log_norm - shifted[label];
  return r;
}

template <typename S>
RowVector<S> softmax_xent_backward(const RowVector<S>& probs, int label) {
  RowVector<S> g = probs;
  g[label] -= S(1);
  return g;
}

// ---------------------------------------------------------------------------
// Unidirectional LSTM. Gate blocks in the 4H columns are ordered input,
// forget, cell candidate, output:
//   z = x_t Wx + h_{t-1} Wh + b
//   i = sig(z_i), f = sig(z_f), g = tanh(z_g), o = sig(z_o)
//   c_t = f c_{t-1} + i g,  h_t = o tanh(c_t)
// A masked frame carries (h, c) through unchanged and emits a zero row.

template <typename S>
S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

template <typename S>
struct LstmCache {
  Matrix<S> gates;      // T x 4H, post-activation
  Matrix<S> hidden;     // (T+1) x H, row 0 is the initial state
  Matrix<S> cell;       // (T+1) x H
  Matrix<S> tanh_cell;  // T x H
  Vector<S> mask;
};

template <typename S>
struct LstmOutput {
  Matrix<S> output;  // T x H
  LstmCache<S> cache;
};

template <typename S>
LstmOutput<S> lstm_forward(const Matrix<S>& seq, const Matrix<S>& input_weight,
                           const Matrix<S>& recurrent_weight, const Matrix<S>& bias,
                           const Vector<S>& mask) {
  const Eigen::Index T = seq.rows();
  const Eigen::Index H = recurrent_weight.rows();
  if (input_weight.rows() != seq.cols() || input_weight.cols() != 4 * H ||
      recurrent_weight.cols() != 4 * H || bias.rows() != 1 || bias.cols() != 4 * H ||
      mask.size() != T) {
    throw ShapeError("lstm_forward: inconsistent parameter or mask shapes");
  }
  LstmOutput<S> r;
  auto& c = r.cache;
  c.mask = mask;
  c.gates = Matrix<S>::Zero(T, 4 * H);
  c.hidden = Matrix<S>::Zero(T + 1, H);
  c.cell = Matrix<S>::Zero(T + 1, H);
  c.tanh_cell = Matrix<S>::Zero(T, H);
  r.output = Matrix<S>::Zero(T, H);

  Matrix<S> projected = seq * input_weight;
  projected.rowwise() += bias.row(0);
  for (Eigen::Index t = 0; t < T; ++t) {
    if (mask[t] == S(0)) {
      c.hidden.row(t + 1) = c.hidden.row(t);
      c.cell.row(t + 1) = c.cell.row(t);
      continue;
    }
    RowVector<S> z = projected.row(t) + c.hidden.row(t) * recurrent_weight;
    for (Eigen::Index k = 0; k < H; ++k) {
      z[k] = sigmoid(z[k]);
      z[H + k] = sigmoid(z[H + k]);
      z[2 * H + k] = std::tanh(z[2 * H + k]);
      z[3 * H + k] = sigmoid(z[3 * H + k]);
    }
    c.gates.row(t) = z;
    c.cell.row(t + 1) = z.segment(H, H).cwiseProduct(c.cell.row(t)) +
                        z.segment(0, H).cwiseProduct(z.segment(2 * H, H));
    c.tanh_cell.row(t) = c.cell.row(t + 1).array().tanh().matrix();
    c.hidden.row(t + 1) = z.segment(3 * H, H).cwiseProduct(c.tanh_cell.row(t));
    r.output.row(t) = c.hidden.row(t + 1);
  }
  return r;
}

template <typename S>
struct LstmGrad {
  Matrix<S> d_input;
  Matrix<S> d_input_weight;
  Matrix<S> d_recurrent_weight;
  Matrix<S> d_bias;
};

template <typename S>
LstmGrad<S> lstm_backward(const Matrix<S>& seq, const Matrix<S>& input_weight,
                          const Matrix<S>& recurrent_weight, const LstmCache<S>& cache,
                          const Matrix<S>& d_out) {
  const Eigen::Index T = seq.rows();
  const Eigen::Index H = recurrent_weight.rows();
  Matrix<S> d_gates = Matrix<S>::Zero(T, 4 * H);  // w.r.t. pre-activations
  RowVector<S> dh_next = RowVector<S>::Zero(H);
  RowVector<S> dc_next = RowVector<S>::Zero(H);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    if (cache.mask[t] == S(0)) continue;  // state passes through untouched
    const auto gates = cache.gates.row(t);
    const auto i = gates.segment(0, H).array();
    const auto f = gates.segment(H, H).array();
    const auto g = gates.segment(2 * H, H).array();
    const auto o = gates.segment(3 * H, H).array();
    const auto tc = cache.tanh_cell.row(t).array();
    const RowVector<S> dh = d_out.row(t) + dh_next;
    const auto dh_a = dh.array();
    const RowVector<S> dc = (dc_next.array() + dh_a * o * (S(1) - tc.square())).matrix();
    const auto dc_a = dc.array();
    d_gates.row(t).segment(0, H) = (dc_a * g * i * (S(1) - i)).matrix();
    d_gates.row(t).segment(H, H) = (dc_a * cache.cell.row(t).array() * f * (S(1) - f)).matrix();
    d_gates.row(t).segment(2 * H, H) = (dc_a * i * (S(1) - g.square())).matrix();
    d_gates.row(t).segment(3 * H, H) = (dh_a * tc * o * (S(1) - o)).matrix();
    dc_next = (dc_a * f).matrix();
    dh_next = d_gates.row(t) * recurrent_weight.transpose();
  }
  LstmGrad<S> grad;
  grad.d_input = d_gates * input_weight.transpose();
  grad.d_input_weight = seq.transpose() * d_gates;
  grad.d_recurrent_weight = cache.hidden.topRows(T).transpose() * d_gates;
  grad.d_bias = d_gates.colwise().sum();
  return grad;
}

}  // namespace serprobe::nn
