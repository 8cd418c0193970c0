#pragma once

#include <functional>
#include <vector>

#include "selfnet/data.hpp"
#include "selfnet/losses.hpp"
#include "selfnet/optimizer.hpp"
#include "selfnet/param_vector.hpp"

namespace selfnet {

// Source-anchored regularizer: adds lambda * MSE(theta*, theta) to the task
// loss, pulling trained weights toward a shared source vector. MSE is the
// mean over all q parameters, so lambda is scale-free w.r.t. network size.
struct AnchorConfig {
  std::vector<float> source;  // theta*, in flatten order; empty = no anchor
  float lambda = 0.0f;
};

struct TrainSchedule {
  int epochs = 30;
  int batch_size = 64;
  OptimizerKind optimizer = OptimizerKind::adam;
  float learning_rate = 1e-3f;
  std::uint64_t seed = 0;
};

struct TrainResult {
  DenseNetwork<float> net;
  ParamVector params;
  std::vector<double> epoch_losses;  // mean minibatch loss (penalty included)
  double train_accuracy = 0.0;
};

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
};

namespace detail {

template <class T, class Src>
void check_anchor_shape(const DenseNetwork<T>& net, const Src& source) {
  if (static_cast<long>(source.size()) != net.param_count()) {
    throw InputError("anchor: source has " + std::to_string(source.size()) +
                     " values, network has " + std::to_string(net.param_count()));
  }
}

}  // namespace detail

// lambda * mean_i (theta_i - source_i)^2, iterating parameters in flatten order.
template <class T>
T anchor_penalty(const DenseNetwork<T>& net, const std::vector<T>& source, T lambda) {
  detail::check_anchor_shape(net, source);
  T sum = 0;
  std::size_t idx = 0;
  for (int l = 0; l < net.layer_count(); ++l) {
    for (const T* p = net.weights[l].data(); p != net.weights[l].data() + net.weights[l].size(); ++p) {
      const T d = *p - source[idx++];
      sum += d * d;
    }
    for (const T* p = net.biases[l].data(); p != net.biases[l].data() + net.biases[l].size(); ++p) {
      const T d = *p - source[idx++];
      sum += d * d;
    }
  }
  return lambda * sum / static_cast<T>(net.param_count());
}

// d(anchor_penalty)/d(theta) = 2*lambda/q * (theta - source), added in place.
template <class T>
void add_anchor_gradient(const DenseNetwork<T>& net, const std::vector<T>& source,
                         T lambda, GradientSet<T>& grads) {
  detail::check_anchor_shape(net, source);
  const T scale = T(2) * lambda / static_cast<T>(net.param_count());
  std::size_t idx = 0;
  for (int l = 0; l < net.layer_count(); ++l) {
    auto* gw = grads.weights[l].data();
    const auto* w = net.weights[l].data();
    for (Eigen::Index i = 0; i < net.weights[l].size(); ++i) {
      gw[i] += scale * (w[i] - source[idx++]);
    }
    auto* gb = grads.biases[l].data();
    const auto* b = net.biases[l].data();
    for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) {
      gb[i] += scale * (b[i] - source[idx++]);
    }
  }
}

// Hook for additional per-step gradient terms (used by the regularization
// baselines); called after the task + anchor gradients are assembled.
using GradHook =
    std::function<void(const DenseNetwork<float>&, GradientSet<float>&)>;

// Minibatch training of one task network. Deterministic for a fixed seed:
// init and epoch shuffles derive from schedule.seed. Throws DivergenceError
// (naming the epoch) if the loss or a gradient goes non-finite.
TrainResult train_task(const TaskSpec& spec, const ArchDescriptor& arch,
                       const ParamVector* init, const AnchorConfig& anchor,
                       const TrainSchedule& schedule, const GradHook& extra_grads = {});

EvalResult evaluate(const DenseNetwork<float>& net, const Dataset& data);

inline EvalResult evaluate(const DenseNetwork<float>& net, const TaskSpec& spec) {
  return evaluate(net, spec.test);
}

// Elementwise arithmetic mean; all vectors must agree in length and arch.
ParamVector mean_params(const std::vector<ParamVector>& vectors);

}  // namespace selfnet
