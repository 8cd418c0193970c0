#pragma once

#include <string>

#include "selfnet/network.hpp"

namespace selfnet {

enum class OptimizerKind { sgd, sgd_momentum, adam };

OptimizerKind optimizer_from_name(std::string_view name);
std::string_view optimizer_name(OptimizerKind k);

// Optimizer hyperparameters plus per-parameter moment buffers. Buffers are
// allocated lazily on the first step so a state can be declared before the
// network shape is known.
template <class T>
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::sgd;
  T learning_rate = T(0.001);
  T momentum = T(0.9);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
  long step_count = 0;
  GradientSet<T> first_moment;   // momentum velocity or Adam m
  GradientSet<T> second_moment;  // Adam v

  static OptimizerState sgd(T lr) {
    OptimizerState s;
    s.kind = OptimizerKind::sgd;
    s.learning_rate = lr;
    return s;
  }
  static OptimizerState sgd_momentum(T lr, T momentum = T(0.9)) {
    OptimizerState s;
    s.kind = OptimizerKind::sgd_momentum;
    s.learning_rate = lr;
    s.momentum = momentum;
    return s;
  }
  static OptimizerState adam(T lr = T(0.001), T beta1 = T(0.9), T beta2 = T(0.999),
                             T epsilon = T(1e-8)) {
    OptimizerState s;
    s.kind = OptimizerKind::adam;
    s.learning_rate = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    return s;
  }
};

namespace detail {

template <class T>
void check_finite_grads(const GradientSet<T>& grads) {
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    if (!grads.weights[l].allFinite() || !grads.biases[l].allFinite()) {
      throw NumericError("non-finite gradient in layer " + std::to_string(l));
    }
  }
}

}  // namespace detail

// In-place parameter update. SGD applies w <- w - lr*g exactly; Adam follows
// the standard bias-corrected update.
template <class T>
void optimizer_step(OptimizerState<T>& state, DenseNetwork<T>& net,
                    const GradientSet<T>& grads) {
  if (grads.weights.size() != net.weights.size()) {
    throw ShapeError("optimizer_step: gradient/net layer count mismatch");
  }
  detail::check_finite_grads(grads);
  if (state.kind != OptimizerKind::sgd && state.first_moment.weights.empty()) {
    state.first_moment = GradientSet<T>::zeros_like(net);
    if (state.kind == OptimizerKind::adam) {
      state.second_moment = GradientSet<T>::zeros_like(net);
    }
  }
  ++state.step_count;
  const T lr = state.learning_rate;
  switch (state.kind) {
    case OptimizerKind::sgd:
      for (std::size_t l = 0; l < net.weights.size(); ++l) {
        net.weights[l] -= lr * grads.weights[l];
        net.biases[l] -= lr * grads.biases[l];
      }
      break;
    case OptimizerKind::sgd_momentum:
      for (std::size_t l = 0; l < net.weights.size(); ++l) {
        auto& vw = state.first_moment.weights[l];
        auto& vb = state.first_moment.biases[l];
        vw = state.momentum * vw + grads.weights[l];
        vb = state.momentum * vb + grads.biases[l];
        net.weights[l] -= lr * vw;
        net.biases[l] -= lr * vb;
      }
      break;
    case OptimizerKind::adam: {
      const T b1 = state.beta1, b2 = state.beta2;
      const T corr1 = T(1) - std::pow(b1, T(state.step_count));
      const T corr2 = T(1) - std::pow(b2, T(state.step_count));
      for (std::size_t l = 0; l < net.weights.size(); ++l) {
        auto& mw = state.first_moment.weights[l];
        auto& vw = state.second_moment.weights[l];
        mw = b1 * mw + (T(1) - b1) * grads.weights[l];
        vw = b2 * vw + (T(1) - b2) * grads.weights[l].cwiseProduct(grads.weights[l]);
        net.weights[l].array() -=
            lr * (mw.array() / corr1) / ((vw.array() / corr2).sqrt() + state.epsilon);
        auto& mb = state.first_moment.biases[l];
        auto& vb = state.second_moment.biases[l];
        mb = b1 * mb + (T(1) - b1) * grads.biases[l];
        vb = b2 * vb + (T(1) - b2) * grads.biases[l].cwiseProduct(grads.biases[l]);
        net.biases[l].array() -=
            lr * (mb.array() / corr1) / ((vb.array() / corr2).sqrt() + state.epsilon);
      }
      break;
    }
  }
}

}  // namespace selfnet
