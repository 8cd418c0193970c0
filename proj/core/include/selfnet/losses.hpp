#pragma once

#include <vector>

#include "selfnet/network.hpp"

namespace selfnet {

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] inside CE/BCE so
// the loss stays finite for arbitrarily confident wrong predictions.
inline constexpr double kProbClamp = 1e-12;

namespace detail {

template <class T>
void check_head_matches(const DenseNetwork<T>& net, Head head) {
  if (head != net.arch.output_head) {
    throw InputError("loss head " + std::string(head_name(head)) +
                     " does not match network head " +
                     std::string(head_name(net.arch.output_head)));
  }
}

template <class T>
void check_labels(const std::vector<int>& labels, Eigen::Index batch, int classes) {
  if (static_cast<Eigen::Index>(labels.size()) != batch) {
    throw ShapeError("labels: expected " + std::to_string(batch) + " entries, got " +
                     std::to_string(labels.size()));
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw InputError("label " + std::to_string(y) + " out of range [0, " +
                       std::to_string(classes) + ")");
    }
  }
}

}  // namespace detail

// Cross-entropy loss against class indices. Requires the softmax_ce head.
template <class T>
T compute_loss(const DenseNetwork<T>& net, const Matrix<T>& batch,
               const std::vector<int>& labels, Head head) {
  detail::check_head_matches(net, head);
  if (head != Head::softmax_ce) {
    throw InputError("class-index targets require the softmax_ce head");
  }
  ForwardTrace<T> trace = forward_trace(net, batch);
  detail::check_labels<T>(labels, batch.rows(), net.output_dim());
  T loss = 0;
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    T p = trace.output(r, labels[r]);
    p = std::min(std::max(p, T(kProbClamp)), T(1.0 - kProbClamp));
    loss -= std::log(p);
  }
  return loss / static_cast<T>(batch.rows());
}

// BCE ({0,1} targets, mean over batch, summed over outputs) or MSE
// (mean over all entries) depending on the head.
template <class T>
T compute_loss(const DenseNetwork<T>& net, const Matrix<T>& batch,
               const Matrix<T>& targets, Head head) {
  detail::check_head_matches(net, head);
  if (head == Head::softmax_ce) {
    throw InputError("softmax_ce head requires class-index targets");
  }
  ForwardTrace<T> trace = forward_trace(net, batch);
  if (targets.rows() != trace.output.rows() || targets.cols() != trace.output.cols()) {
    throw ShapeError("targets shape does not match network output");
  }
  if (head == Head::sigmoid_bce) {
    auto p = trace.output.array().min(T(1.0 - kProbClamp)).max(T(kProbClamp));
    auto y = targets.array();
    T total = -(y * p.log() + (T(1) - y) * (T(1) - p).log()).sum();
    return total / static_cast<T>(batch.rows());
  }
  // linear_mse
  return (trace.output - targets).array().square().sum() /
         static_cast<T>(targets.size());
}

namespace detail {

// dL/da for the last layer's post-activation, per head.
template <class T>
Matrix<T> head_gradient(const ForwardTrace<T>& trace, const std::vector<int>& labels) {
  Matrix<T> g = trace.output;
  T inv_b = T(1) / static_cast<T>(g.rows());
  for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, labels[r]) -= T(1);
  return g * inv_b;
}

template <class T>
Matrix<T> head_gradient(const ForwardTrace<T>& trace, const Matrix<T>& targets, Head head) {
  if (head == Head::sigmoid_bce) {
    return (trace.output - targets) / static_cast<T>(trace.output.rows());
  }
  return T(2) * (trace.output - targets) / static_cast<T>(targets.size());
}

}  // namespace detail

// Backpropagates an upstream gradient w.r.t. the last layer's post-activation
// through the layer stack. Shared by the task-network losses and the
// autoencoder loss.
template <class T>
GradientSet<T> backward_from_trace(const DenseNetwork<T>& net, const Matrix<T>& batch,
                                   const ForwardTrace<T>& trace, Matrix<T> grad_post) {
  GradientSet<T> grads;
  grads.weights.resize(net.layer_count());
  grads.biases.resize(net.layer_count());
  for (int l = net.layer_count() - 1; l >= 0; --l) {
    Matrix<T> delta =
        grad_post.cwiseProduct(detail::activation_derivative<T>(
            net.arch.activations[l], trace.pre[l], trace.post[l]));
    const Matrix<T>& input = (l == 0) ? batch : trace.post[l - 1];
    grads.weights[l].noalias() = delta.transpose() * input;
    grads.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) grad_post.noalias() = delta * net.weights[l];
  }
  return grads;
}

// Gradient of compute_loss w.r.t. every weight and bias (class-index form).
template <class T>
GradientSet<T> backward(const DenseNetwork<T>& net, const Matrix<T>& batch,
                        const std::vector<int>& labels, Head head) {
  detail::check_head_matches(net, head);
  if (head != Head::softmax_ce) {
    throw InputError("class-index targets require the softmax_ce head");
  }
  ForwardTrace<T> trace = forward_trace(net, batch);
  detail::check_labels<T>(labels, batch.rows(), net.output_dim());
  return backward_from_trace(net, batch, trace, detail::head_gradient(trace, labels));
}

// Gradient of compute_loss w.r.t. every weight and bias (matrix-target form).
template <class T>
GradientSet<T> backward(const DenseNetwork<T>& net, const Matrix<T>& batch,
                        const Matrix<T>& targets, Head head) {
  detail::check_head_matches(net, head);
  if (head == Head::softmax_ce) {
    throw InputError("softmax_ce head requires class-index targets");
  }
  ForwardTrace<T> trace = forward_trace(net, batch);
  if (targets.rows() != trace.output.rows() || targets.cols() != trace.output.cols()) {
    throw ShapeError("targets shape does not match network output");
  }
  return backward_from_trace(net, batch, trace,
                             detail::head_gradient(trace, targets, head));
}

}  // namespace selfnet
