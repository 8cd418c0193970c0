#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "selfnet/arch.hpp"
#include "selfnet/errors.hpp"
#include "selfnet/rng.hpp"

namespace selfnet {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatrixF = Matrix<float>;
using VectorF = Vector<float>;

// Dense MLP. Weight matrix of layer l has shape [out x in]; a layer computes
// act(W * x + b) and the output head (softmax/sigmoid/identity) is applied on
// top of the last layer's activation.
template <class T>
struct DenseNetwork {
  ArchDescriptor arch;
  std::vector<Matrix<T>> weights;
  std::vector<Vector<T>> biases;

  static DenseNetwork zeros(const ArchDescriptor& arch) {
    arch.validate();
    DenseNetwork net;
    net.arch = arch;
    for (int l = 0; l < arch.layer_count(); ++l) {
      net.weights.push_back(Matrix<T>::Zero(arch.layer_dims[l + 1], arch.layer_dims[l]));
      net.biases.push_back(Vector<T>::Zero(arch.layer_dims[l + 1]));
    }
    return net;
  }

  // Glorot-uniform weights, zero biases.
  static DenseNetwork glorot(const ArchDescriptor& arch, Rng& rng) {
    DenseNetwork net = zeros(arch);
    for (auto& w : net.weights) {
      double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
          w(r, c) = static_cast<T>(rng.uniform(-limit, limit));
        }
      }
    }
    return net;
  }

  int layer_count() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return arch.input_dim(); }
  int output_dim() const { return arch.output_dim(); }
  long param_count() const { return arch.param_count(); }

  template <class U>
  DenseNetwork<U> cast() const {
    DenseNetwork<U> out;
    out.arch = arch;
    for (const auto& w : weights) out.weights.push_back(w.template cast<U>());
    for (const auto& b : biases) out.biases.push_back(b.template cast<U>());
    return out;
  }
};

// Gradients, shape-congruent with a network's weights and biases.
template <class T>
struct GradientSet {
  std::vector<Matrix<T>> weights;
  std::vector<Vector<T>> biases;

  static GradientSet zeros_like(const DenseNetwork<T>& net) {
    GradientSet g;
    for (const auto& w : net.weights) g.weights.push_back(Matrix<T>::Zero(w.rows(), w.cols()));
    for (const auto& b : net.biases) g.biases.push_back(Vector<T>::Zero(b.size()));
    return g;
  }

  void scale(T c) {
    for (auto& w : weights) w *= c;
    for (auto& b : biases) b *= c;
  }

  void add_scaled(const GradientSet& other, T c) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += c * other.weights[l];
      biases[l] += c * other.biases[l];
    }
  }
};

namespace detail {

template <class T>
void apply_activation(Activation act, Matrix<T>& z) {
  switch (act) {
    case Activation::relu:
      z = z.cwiseMax(T(0));
      break;
    case Activation::sigmoid:
      z = ((-z.array()).exp() + T(1)).inverse().matrix();
      break;
    case Activation::tanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::identity:
      break;
  }
}

// derivative of the activation given pre-activation z and post-activation a
template <class T>
Matrix<T> activation_derivative(Activation act, const Matrix<T>& z, const Matrix<T>& a) {
  switch (act) {
    case Activation::relu:
      return (z.array() > T(0)).template cast<T>().matrix();
    case Activation::sigmoid:
      return (a.array() * (T(1) - a.array())).matrix();
    case Activation::tanh:
      return (T(1) - a.array().square()).matrix();
    case Activation::identity:
      return Matrix<T>::Ones(z.rows(), z.cols());
  }
  return Matrix<T>::Ones(z.rows(), z.cols());
}

template <class T>
Matrix<T> softmax_rows(const Matrix<T>& z) {
  Matrix<T> p(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    T m = z.row(r).maxCoeff();
    p.row(r) = (z.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

}  // namespace detail

// Per-layer pre/post activations plus the head-transformed output.
// Kept around so backward() does not recompute the forward pass.
template <class T>
struct ForwardTrace {
  std::vector<Matrix<T>> pre;   // z_l = a_{l-1} W_l^T + b_l
  std::vector<Matrix<T>> post;  // a_l = act_l(z_l)
  Matrix<T> output;             // head transform of a_last
};

template <class T>
ForwardTrace<T> forward_trace(const DenseNetwork<T>& net, const Matrix<T>& batch) {
  if (batch.cols() != net.input_dim()) {
    throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                     " columns, network expects " + std::to_string(net.input_dim()));
  }
  ForwardTrace<T> trace;
  Matrix<T> a = batch;
  for (int l = 0; l < net.layer_count(); ++l) {
    Matrix<T> z = a * net.weights[l].transpose();
    z.rowwise() += net.biases[l].transpose();
    trace.pre.push_back(z);
    detail::apply_activation(net.arch.activations[l], z);
    trace.post.push_back(z);
    a = std::move(z);
  }
  switch (net.arch.output_head) {
    case Head::softmax_ce:
      trace.output = detail::softmax_rows(a);
      break;
    case Head::sigmoid_bce:
      trace.output = ((-a.array()).exp() + T(1)).inverse().matrix();
      break;
    case Head::linear_mse:
      trace.output = a;
      break;
  }
  return trace;
}

// Forward pass with the head transform applied (softmax rows sum to 1,
// sigmoid outputs in (0,1), identity for the MSE head).
template <class T>
Matrix<T> forward(const DenseNetwork<T>& net, const Matrix<T>& batch) {
  return forward_trace(net, batch).output;
}

}  // namespace selfnet
