#pragma once

#include <cmath>

#include "serprobe/nn/model.hpp"

namespace serprobe::optim {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename S>
struct AdamState {
  nn::ParamSet<S> m;
  nn::ParamSet<S> v;
  long long step = 0;

  static AdamState zeros_like(const nn::ParamSet<S>& params) {
    return AdamState{params.zeros_like(), params.zeros_like(), 0};
  }
};

class NonFiniteGradientError : public Error {
 public:
  using Error::Error;
};

// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
// p <- p - lr * m_hat / (sqrt(v_hat) + eps), with bias-corrected moments.
template <typename S>
void adam_step(nn::ParamSet<S>& params, const nn::ParamSet<S>& grads, AdamState<S>& state,
               const AdamConfig& cfg) {
  for (const auto& [name, g] : grads) {
    if (!g.allFinite()) {
      throw NonFiniteGradientError("non-finite gradient for parameter '" + name + "' at step " +
                                   std::to_string(state.step + 1));
    }
  }
  if (state.m.size() == 0) state = AdamState<S>::zeros_like(params);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const S correction1 = static_cast<S>(1.0 - std::pow(cfg.beta1, t));
  const S correction2 = static_cast<S>(1.0 - std::pow(cfg.beta2, t));
  const S b1 = static_cast<S>(cfg.beta1), b2 = static_cast<S>(cfg.beta2);
  const S lr = static_cast<S>(cfg.learning_rate), eps = static_cast<S>(cfg.epsilon);
  for (auto& [name, p] : params) {
    const Matrix<S>& g = grads.at(name);
    Matrix<S>& m = state.m.at(name);
    Matrix<S>& v = state.v.at(name);
    m = b1 * m + (S(1) - b1) * g;
    v = b2 * v + (S(1) - b2) * g.cwiseAbs2();
    p.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
  }
}

}  // namespace serprobe::optim
