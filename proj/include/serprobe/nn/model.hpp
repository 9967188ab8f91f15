#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "serprobe/featureio/batch.hpp"
#include "serprobe/nn/layers.hpp"

namespace serprobe::nn {

enum class Variant { dense, lstm, fusion };

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);

struct ModelConfig {
  Variant variant = Variant::dense;
  int hidden = 128;
  int num_classes = 4;
  double dropout = 0.2;
  int num_layers = 1;  // L, the number of aggregated streams
  int input_dim = 0;   // D
  int aux_dim = 0;     // D_aux, Fusion only
};

void validate(const ModelConfig& config);
nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Named trainable arrays. Biases are 1 x N, alpha is L x 1. Iteration order
// is the lexicographic order of the names, which fixes the order of
// initialization draws and of checkpoint entries.
template <typename S>
class ParamSet {
 public:
  using Map = std::map<std::string, Matrix<S>>;

  Matrix<S>& at(const std::string& name) { return find(name)->second; }
  const Matrix<S>& at(const std::string& name) const { return find(name)->second; }
  bool contains(const std::string& name) const { return arrays_.count(name) > 0; }
  void set(const std::string& name, Matrix<S> value) { arrays_[name] = std::move(value); }

  std::size_t size() const { return arrays_.size(); }
  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& [_, m] : arrays_) n += static_cast<std::size_t>(m.size());
    return n;
  }

  auto begin() { return arrays_.begin(); }
  auto end() { return arrays_.end(); }
  auto begin() const { return arrays_.begin(); }
  auto end() const { return arrays_.end(); }

  // Same names and shapes, all zeros.
  ParamSet zeros_like() const {
    ParamSet z;
    for (const auto& [name, m] : arrays_) z.set(name, Matrix<S>::Zero(m.rows(), m.cols()));
    return z;
  }

  template <typename T>
  ParamSet<T> cast() const {
    ParamSet<T> out;
    for (const auto& [name, m] : arrays_) out.set(name, m.template cast<T>());
    return out;
  }

  bool operator==(const ParamSet& other) const {
    if (arrays_.size() != other.arrays_.size()) return false;
    for (auto a = arrays_.begin(), b = other.arrays_.begin(); a != arrays_.end(); ++a, ++b) {
      if (a->first != b->first || a->second.rows() != b->second.rows() ||
          a->second.cols() != b->second.cols() || a->second != b->second) {
        return false;
      }
    }
    return true;
  }

 private:
  typename Map::iterator find(const std::string& name) {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw Error("parameter '" + name + "' not present");
    return it;
  }
  typename Map::const_iterator find(const std::string& name) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw Error("parameter '" + name + "' not present");
    return it;
  }

  Map arrays_;
};

namespace param {
inline const std::string alpha = "alpha";
inline const std::string dense1_w = "dense1.weight";
inline const std::string dense1_b = "dense1.bias";
inline const std::string dense2_w = "dense2.weight";
inline const std::string dense2_b = "dense2.bias";
inline const std::string lstm_wx = "lstm.input_weight";
inline const std::string lstm_wh = "lstm.recurrent_weight";
inline const std::string lstm_b = "lstm.bias";
inline const std::string aux_w = "dense1_aux.weight";
inline const std::string aux_b = "dense1_aux.bias";
inline const std::string fused_w = "dense2_fused.weight";
inline const std::string fused_b = "dense2_fused.bias";
inline const std::string head_w = "head.weight";
inline const std::string head_b = "head.bias";
}  // namespace param

// alpha = 1, weights Glorot-uniform, biases 0, LSTM forget-gate bias 1.
template <typename S>
ParamSet<S> init_params(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  const Eigen::Index H = config.hidden, D = config.input_dim, C = config.num_classes;
  ParamSet<S> p;
  p.set(param::alpha, Matrix<S>::Ones(config.num_layers, 1));
  p.set(param::dense1_w, Matrix<S>(D, H));
  p.set(param::dense1_b, Matrix<S>::Zero(1, H));
  switch (config.variant) {
    case Variant::dense:
      p.set(param::dense2_w, Matrix<S>(H, H));
      p.set(param::dense2_b, Matrix<S>::Zero(1, H));
      break;
    case Variant::lstm: {
      p.set(param::lstm_wx, Matrix<S>(H, 4 * H));
      p.set(param::lstm_wh, Matrix<S>(H, 4 * H));
      Matrix<S> b = Matrix<S>::Zero(1, 4 * H);
      b.middleCols(H, H).setOnes();
      p.set(param::lstm_b, std::move(b));
      break;
    }
    case Variant::fusion:
      p.set(param::aux_w, Matrix<S>(config.aux_dim, H));
      p.set(param::aux_b, Matrix<S>::Zero(1, H));
      p.set(param::fused_w, Matrix<S>(2 * H, H));
      p.set(param::fused_b, Matrix<S>::Zero(1, H));
      break;
  }
  p.set(param::head_w, Matrix<S>(H, C));
  p.set(param::head_b, Matrix<S>::Zero(1, C));

  std::mt19937_64 rng(seed);
  for (auto& [name, m] : p) {
    if (name.ends_with(".weight")) {
      const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<S>(u(rng));
      }
    }
  }
  return p;
}

// Per-utterance intermediates kept for the backward pass.
template <typename S>
struct UtteranceTrace {
  std::size_t frames = 0;  // rows actually processed, up to the last valid frame
  Vector<S> mask;
  Matrix<S> aggregated;
  Matrix<S> pre1, scale1, hidden1;
  Matrix<S> aux_input, pre_aux, scale_aux, hidden_aux;
  Matrix<S> second_input;  // hidden1, or [hidden1 | hidden_aux] for Fusion
  Matrix<S> pre2, scale2, hidden2;
  LstmCache<S> lstm;
  RowVector<S> pooled;
  RowVector<S> probs;
  int label = 0;
};

// References the batch it was computed from; the batch must outlive it.
template <typename S>
struct ForwardTrace {
  const Batch* batch = nullptr;
  std::vector<UtteranceTrace<S>> utterances;
};

template <typename S>
struct ForwardResult {
  S loss = 0;           // batch-mean cross-entropy
  Matrix<S> probs;      // B x C
  ForwardTrace<S> trace;
};

namespace detail {

template <typename S>
std::vector<Matrix<S>> utterance_layers(const Batch& batch, std::size_t b, std::size_t frames) {
  std::vector<Matrix<S>> layers;
  layers.reserve(batch.num_layers);
  for (std::size_t l = 0; l < batch.num_layers; ++l) {
    layers.push_back(batch.layer(b, l).topRows(static_cast<Eigen::Index>(frames)).template cast<S>());
  }
  return layers;
}

inline std::size_t processed_frames(const Batch& batch, std::size_t b) {
  for (std::size_t t = batch.max_frames; t > 0; --t) {
    if (batch.mask(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(t - 1)) != 0.0f) return t;
  }
  return 0;
}

}  // namespace detail

// Dense:  aggregate -> dense1+relu+dropout -> dense2+relu+dropout -> pool -> head
// LSTM:   dense2 stage replaced by an LSTM followed by dropout
// Fusion: aux stream gets its own dense1+relu+dropout; the two first-layer
//         outputs are concatenated per frame before dense2 (input 2H)
template <typename S, typename Rng>
ForwardResult<S> model_forward(const ModelConfig& config, const ParamSet<S>& params,
                               const Batch& batch, bool training, Rng& rng) {
  const Matrix<S>& alpha_m = params.at(param::alpha);
  if (static_cast<std::size_t>(alpha_m.rows()) != batch.num_layers) {
    throw ShapeError("batch has " + std::to_string(batch.num_layers) + " layers, alpha has " +
                     std::to_string(alpha_m.rows()));
  }
  if (static_cast<int>(batch.dim) != config.input_dim) {
    throw ShapeError("batch dim " + std::to_string(batch.dim) + " != model input_dim " +
                     std::to_string(config.input_dim));
  }
  const bool fusion = config.variant == Variant::fusion;
  if (fusion && (!batch.has_aux() || static_cast<int>(batch.aux_dim) != config.aux_dim)) {
    throw ShapeError("fusion model requires an aux stream of dim " + std::to_string(config.aux_dim));
  }
  const Vector<S> alpha = alpha_m.col(0);
  const double p = config.dropout;

  ForwardResult<S> result;
  result.trace.batch = &batch;
  result.probs.resize(static_cast<Eigen::Index>(batch.size), config.num_classes);
  S total_loss = 0;
  for (std::size_t b = 0; b < batch.size; ++b) {
    UtteranceTrace<S> u;
    u.label = batch.labels[b];
    u.frames = detail::processed_frames(batch, b);
    const auto n = static_cast<Eigen::Index>(u.frames);
    u.mask = batch.mask.row(static_cast<Eigen::Index>(b)).head(n).transpose().template cast<S>();

    const auto layers = detail::utterance_layers<S>(batch, b, u.frames);
    u.aggregated = weighted_aggregate<S>(layers, alpha);
    u.pre1 = pointwise_dense(u.aggregated, params.at(param::dense1_w), params.at(param::dense1_b));
    auto a1 = relu_dropout(u.pre1, p, training, rng);
    u.hidden1 = std::move(a1.output);
    u.scale1 = std::move(a1.scale);

    if (fusion) {
      u.aux_input = batch.aux(b).topRows(n).template cast<S>();
      u.pre_aux = pointwise_dense(u.aux_input, params.at(param::aux_w), params.at(param::aux_b));
      auto aa = relu_dropout(u.pre_aux, p, training, rng);
      u.hidden_aux = std::move(aa.output);
      u.scale_aux = std::move(aa.scale);
      u.second_input.resize(n, u.hidden1.cols() + u.hidden_aux.cols());
      u.second_input << u.hidden1, u.hidden_aux;
    } else {
      u.second_input = u.hidden1;
    }

    if (config.variant == Variant::lstm) {
      auto out = lstm_forward(u.second_input, params.at(param::lstm_wx), params.at(param::lstm_wh),
                              params.at(param::lstm_b), u.mask);
      u.lstm = std::move(out.cache);
      u.pre2 = std::move(out.output);
      auto a2 = dropout(u.pre2, p, training, rng);
      u.hidden2 = std::move(a2.output);
      u.scale2 = std::move(a2.scale);
    } else {
      const auto& w2 = params.at(fusion ? param::fused_w : param::dense2_w);
      const auto& b2 = params.at(fusion ? param::fused_b : param::dense2_b);
      u.pre2 = pointwise_dense(u.second_input, w2, b2);
      auto a2 = relu_dropout(u.pre2, p, training, rng);
      u.hidden2 = std::move(a2.output);
      u.scale2 = std::move(a2.scale);
    }

    u.pooled = masked_mean_pool(u.hidden2, u.mask);
    RowVector<S> logits = u.pooled * params.at(param::head_w) + params.at(param::head_b);
    auto sx = softmax_xent(logits, u.label);
    total_loss += sx.loss;
    u.probs = std::move(sx.probs);
    result.probs.row(static_cast<Eigen::Index>(b)) = u.probs;
    result.trace.utterances.push_back(std::move(u));
  }
  result.loss = total_loss / static_cast<S>(batch.size);
  return result;
}

// Gradient of the batch-mean loss w.r.t. every parameter.
template <typename S>
ParamSet<S> model_backward(const ModelConfig& config, const ParamSet<S>& params,
                           const ForwardTrace<S>& trace) {
  if (trace.batch == nullptr) throw Error("model_backward: trace has no batch");
  const Batch& batch = *trace.batch;
  const bool fusion = config.variant == Variant::fusion;
  const Eigen::Index H = config.hidden;
  const Vector<S> alpha = params.at(param::alpha).col(0);
  const S inv_batch = S(1) / static_cast<S>(batch.size);
  ParamSet<S> g = params.zeros_like();

  for (std::size_t b = 0; b < trace.utterances.size(); ++b) {
    const auto& u = trace.utterances[b];
    RowVector<S> d_logits = softmax_xent_backward(u.probs, u.label) * inv_batch;
    g.at(param::head_w).noalias() += u.pooled.transpose() * d_logits;
    g.at(param::head_b) += d_logits;
    const RowVector<S> d_pooled = d_logits * params.at(param::head_w).transpose();
    const Matrix<S> d_hidden2 = masked_mean_pool_backward(u.mask, d_pooled);

    Matrix<S> d_second;
    if (config.variant == Variant::lstm) {
      const Matrix<S> d_lstm_out = dropout_backward(u.scale2, d_hidden2);
      auto lg = lstm_backward(u.second_input, params.at(param::lstm_wx), params.at(param::lstm_wh),
                              u.lstm, d_lstm_out);
      g.at(param::lstm_wx) += lg.d_input_weight;
      g.at(param::lstm_wh) += lg.d_recurrent_weight;
      g.at(param::lstm_b) += lg.d_bias;
      d_second = std::move(lg.d_input);
    } else {
      const Matrix<S> d_pre2 = relu_dropout_backward(u.pre2, u.scale2, d_hidden2);
      const auto& w2 = params.at(fusion ? param::fused_w : param::dense2_w);
      auto dg = pointwise_dense_backward(u.second_input, w2, d_pre2);
      g.at(fusion ? param::fused_w : param::dense2_w) += dg.d_weight;
      g.at(fusion ? param::fused_b : param::dense2_b) += dg.d_bias;
      d_second = std::move(dg.d_input);
    }

    Matrix<S> d_hidden1 = d_second.leftCols(H);
    if (fusion) {
      const Matrix<S> d_pre_aux = relu_dropout_backward(u.pre_aux, u.scale_aux, Matrix<S>(d_second.rightCols(H)));
      auto ag = pointwise_dense_backward(u.aux_input, params.at(param::aux_w), d_pre_aux);
      g.at(param::aux_w) += ag.d_weight;
      g.at(param::aux_b) += ag.d_bias;
    }

    const Matrix<S> d_pre1 = relu_dropout_backward(u.pre1, u.scale1, d_hidden1);
    auto d1 = pointwise_dense_backward(u.aggregated, params.at(param::dense1_w), d_pre1);
    g.at(param::dense1_w) += d1.d_weight;
    g.at(param::dense1_b) += d1.d_bias;

    const auto layers = detail::utterance_layers<S>(batch, b, u.frames);
    g.at(param::alpha).col(0) += weighted_aggregate_alpha_grad<S>(layers, alpha, u.aggregated, d1.d_input);
  }
  return g;
}

// Normalized aggregation weights alpha_i / sum_j alpha_j.
template <typename S>
Vector<S> normalized_alpha(const ParamSet<S>& params) {
  const Vector<S> alpha = params.at(param::alpha).col(0);
  return alpha / alpha_sum(alpha);
}

}  // namespace serprobe::nn
