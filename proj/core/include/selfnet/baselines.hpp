#pragma once

#include <optional>
#include <string>
#include <vector>

#include "selfnet/task_trainer.hpp"

namespace selfnet {

enum class PenaltyKind { none, l2_all, l2_online, ewc, ewc_online };

PenaltyKind penalty_kind_from_name(std::string_view name);
std::string_view penalty_kind_name(PenaltyKind k);

// Diagonal empirical Fisher information: mean over samples of the squared
// log-likelihood gradient at the sample's own label.
struct FisherDiagonal {
  GradientSet<float> values;
};

FisherDiagonal fisher_diag(const DenseNetwork<float>& net, const TaskSpec& spec,
                           std::size_t sample_count);

// One remembered past task: its solution and (for EWC) its Fisher weights.
template <class T>
struct PenaltyAnchorT {
  std::vector<T> theta;        // flatten order
  GradientSet<T> fisher;       // empty for the L2 family
};

// Quadratic stay-close penalties added to a shared network's task loss.
// l2_all / ewc keep one anchor per past task; the online variants keep a
// single running anchor.
template <class T>
struct PenaltyStateT {
  PenaltyKind kind = PenaltyKind::none;
  T lambda_b = T(0);
  T gamma = T(1);  // online EWC accumulation factor
  std::vector<PenaltyAnchorT<T>> anchors;
  std::optional<PenaltyAnchorT<T>> running;

  std::size_t stored_anchor_count() const {
    if (kind == PenaltyKind::l2_all || kind == PenaltyKind::ewc) return anchors.size();
    return running ? 1 : 0;
  }

  T penalty(const DenseNetwork<T>& net) const;
  void add_gradient(const DenseNetwork<T>& net, GradientSet<T>& grads) const;
};

using PenaltyState = PenaltyStateT<float>;

namespace detail {

// sum over parameters of weight[i] * (theta[i] - anchor[i])^2, iterating in
// flatten order; weight = 1 when the anchor carries no Fisher
template <class T>
T weighted_square_sum(const DenseNetwork<T>& net, const PenaltyAnchorT<T>& anchor) {
  T sum = 0;
  std::size_t idx = 0;
  const bool weighted = !anchor.fisher.weights.empty();
  for (int l = 0; l < net.layer_count(); ++l) {
    const auto* w = net.weights[l].data();
    const auto* fw = weighted ? anchor.fisher.weights[l].data() : nullptr;
    for (Eigen::Index i = 0; i < net.weights[l].size(); ++i) {
      const T d = w[i] - anchor.theta[idx++];
      sum += (weighted ? fw[i] : T(1)) * d * d;
    }
    const auto* b = net.biases[l].data();
    const auto* fb = weighted ? anchor.fisher.biases[l].data() : nullptr;
    for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) {
      const T d = b[i] - anchor.theta[idx++];
      sum += (weighted ? fb[i] : T(1)) * d * d;
    }
  }
  return sum;
}

// adds c * weight[i] * (theta[i] - anchor[i]) into the gradients
template <class T>
void add_weighted_pull(const DenseNetwork<T>& net, const PenaltyAnchorT<T>& anchor,
                       T c, GradientSet<T>& grads) {
  std::size_t idx = 0;
  const bool weighted = !anchor.fisher.weights.empty();
  for (int l = 0; l < net.layer_count(); ++l) {
    const auto* w = net.weights[l].data();
    const auto* fw = weighted ? anchor.fisher.weights[l].data() : nullptr;
    auto* gw = grads.weights[l].data();
    for (Eigen::Index i = 0; i < net.weights[l].size(); ++i) {
      gw[i] += c * (weighted ? fw[i] : T(1)) * (w[i] - anchor.theta[idx++]);
    }
    const auto* b = net.biases[l].data();
    const auto* fb = weighted ? anchor.fisher.biases[l].data() : nullptr;
    auto* gb = grads.biases[l].data();
    for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) {
      gb[i] += c * (weighted ? fb[i] : T(1)) * (b[i] - anchor.theta[idx++]);
    }
  }
}

}  // namespace detail

template <class T>
T PenaltyStateT<T>::penalty(const DenseNetwork<T>& net) const {
  if (lambda_b == T(0) || kind == PenaltyKind::none) return T(0);
  switch (kind) {
    case PenaltyKind::l2_all: {
      T sum = 0;
      for (const auto& a : anchors) sum += detail::weighted_square_sum(net, a);
      return lambda_b * sum;
    }
    case PenaltyKind::l2_online:
      return running ? lambda_b * detail::weighted_square_sum(net, *running) : T(0);
    case PenaltyKind::ewc: {
      T sum = 0;
      for (const auto& a : anchors) sum += detail::weighted_square_sum(net, a);
      return lambda_b / T(2) * sum;
    }
    case PenaltyKind::ewc_online:
      return running ? lambda_b / T(2) * detail::weighted_square_sum(net, *running) : T(0);
    case PenaltyKind::none:
      break;
  }
  return T(0);
}

template <class T>
void PenaltyStateT<T>::add_gradient(const DenseNetwork<T>& net,
                                    GradientSet<T>& grads) const {
  if (lambda_b == T(0) || kind == PenaltyKind::none) return;
  switch (kind) {
    case PenaltyKind::l2_all:
      for (const auto& a : anchors) {
        detail::add_weighted_pull(net, a, T(2) * lambda_b, grads);
      }
      break;
    case PenaltyKind::l2_online:
      if (running) detail::add_weighted_pull(net, *running, T(2) * lambda_b, grads);
      break;
    case PenaltyKind::ewc:
      for (const auto& a : anchors) detail::add_weighted_pull(net, a, lambda_b, grads);
      break;
    case PenaltyKind::ewc_online:
      if (running) detail::add_weighted_pull(net, *running, lambda_b, grads);
      break;
    case PenaltyKind::none:
      break;
  }
}

// Folds a finished task into the penalty state: stores its solution as an
// anchor; the EWC variants also take the task's Fisher diagonal.
void absorb_task(PenaltyState& state, const DenseNetwork<float>& net,
                 const TaskSpec& spec, std::size_t fisher_samples);

struct BaselineRunResult {
  // accuracy[s][t] = accuracy on task t's test set after finishing task s (t <= s)
  std::vector<std::vector<double>> accuracy;
  ParamVector final_params;
  PenaltyState final_state;
};

// Trains one shared network over the task sequence with the given penalty.
// All tasks must agree on input dim and class count.
BaselineRunResult train_sequential(PenaltyKind kind, float lambda_b,
                                   const std::vector<TaskSpec>& specs,
                                   const ArchDescriptor& arch,
                                   const TrainSchedule& schedule,
                                   std::size_t fisher_samples = 256,
                                   float gamma = 1.0f);

}  // namespace selfnet
