#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "selfnet/losses.hpp"
#include "selfnet/network.hpp"
#include "selfnet/optimizer.hpp"
#include "selfnet/rng.hpp"

namespace selfnet {

// Contractive autoencoder over weight chunks: n -> h -> d -> h -> n with
// sigmoid hidden layers and identity latent/output. The first two layers are
// the encoder, the last two the decoder.
template <class T>
struct CaeModelT {
  DenseNetwork<T> net;
  T contractive_coeff = T(1e-4);

  int input_dim() const { return net.arch.layer_dims[0]; }
  int hidden_dim() const { return net.arch.layer_dims[1]; }
  int latent_dim() const { return net.arch.layer_dims[2]; }

  template <class U>
  CaeModelT<U> cast() const {
    return CaeModelT<U>{net.template cast<U>(), static_cast<U>(contractive_coeff)};
  }
};

using CaeModel = CaeModelT<float>;

ArchDescriptor make_cae_arch(int n, int h, int d);

template <class T>
CaeModelT<T> make_cae(int n, int h, int d, T contractive_coeff, Rng& rng) {
  CaeModelT<T> model;
  model.net = DenseNetwork<T>::glorot(make_cae_arch(n, h, d), rng);
  model.contractive_coeff = contractive_coeff;
  return model;
}

// Per-task latent memory: one code per weight chunk plus the bookkeeping
// needed to rebuild the original network.
struct LatentRecord {
  std::string task_id;
  std::vector<std::vector<float>> codes;  // r codes, each length d
  std::uint64_t original_len = 0;         // q
  std::uint32_t chunk_size = 0;           // n
  std::vector<std::uint32_t> arch_dims;

  std::size_t code_count() const { return codes.size(); }
  std::size_t latent_dim() const { return codes.empty() ? 0 : codes.front().size(); }
  void validate() const;
};

struct ConsolidationConfig {
  double cosine_threshold = 0.997;
  int max_epochs = 5000;
  float learning_rate = 1e-3f;
  float lambda_c = 1e-4f;  // used when building models; a model carries its own copy
  std::uint64_t shuffle_seed = 0;
  double chunk_floor_slack = 0.002;  // per-chunk floor = threshold - slack
};

struct ConsolidationResult {
  std::vector<std::vector<float>> codes;  // encode(target) under the final model
  double mean_cosine = 0.0;
  double min_cosine = 0.0;
  int epochs_run = 0;
  bool converged = false;
};

template <class T>
Matrix<T> encode(const CaeModelT<T>& model, const Matrix<T>& x) {
  if (x.cols() != model.input_dim()) {
    throw ShapeError("encode: input has " + std::to_string(x.cols()) +
                     " columns, model expects " + std::to_string(model.input_dim()));
  }
  Matrix<T> a = x * model.net.weights[0].transpose();
  a.rowwise() += model.net.biases[0].transpose();
  a = ((-a.array()).exp() + T(1)).inverse().matrix();
  Matrix<T> e = a * model.net.weights[1].transpose();
  e.rowwise() += model.net.biases[1].transpose();
  return e;
}

template <class T>
Matrix<T> decode(const CaeModelT<T>& model, const Matrix<T>& e) {
  if (e.cols() != model.latent_dim()) {
    throw ShapeError("decode: input has " + std::to_string(e.cols()) +
                     " columns, model expects " + std::to_string(model.latent_dim()));
  }
  Matrix<T> a = e * model.net.weights[2].transpose();
  a.rowwise() += model.net.biases[2].transpose();
  a = ((-a.array()).exp() + T(1)).inverse().matrix();
  Matrix<T> out = a * model.net.weights[3].transpose();
  out.rowwise() += model.net.biases[3].transpose();
  return out;
}

std::vector<float> encode_vec(const CaeModel& model, const std::vector<float>& x);
std::vector<float> decode_vec(const CaeModel& model, const std::vector<float>& e);

namespace detail {

// ||dh/dx||_F^2 for a sigmoid hidden layer in closed form:
// sum_j (h_j (1 - h_j))^2 * sum_i W_ji^2, averaged over the batch.
template <class T>
T contractive_penalty_from_hidden(const Matrix<T>& hidden, const Matrix<T>& w0) {
  Vector<T> a = w0.rowwise().squaredNorm();
  Matrix<T> s2 = (hidden.array() * (T(1) - hidden.array())).square().matrix();
  return (s2 * a).sum() / static_cast<T>(hidden.rows());
}

// d(lambda * penalty)/d(encoder layer 0), added into (gw0, gb0).
template <class T>
void add_contractive_grads(const Matrix<T>& x, const Matrix<T>& hidden,
                           const Matrix<T>& w0, T lambda, Matrix<T>& gw0,
                           Vector<T>& gb0) {
  const T inv_b = T(1) / static_cast<T>(x.rows());
  Vector<T> a = w0.rowwise().squaredNorm();
  auto h = hidden.array();
  Matrix<T> s2 = (h * (T(1) - h)).square().matrix();
  // path through h_j: 2 s_j^2 (1-2h_j) A_j x_i
  Matrix<T> g = (T(2) * inv_b) * (s2.array() * (T(1) - T(2) * h)).matrix();
  gw0.noalias() += lambda * ((g.transpose() * x).array().colwise() * a.array()).matrix();
  gb0 += lambda * (g.colwise().sum().transpose().array() * a.array()).matrix();
  // path through A_j: 2 s_j^2 W_ji
  Vector<T> c = (T(2) * inv_b) * s2.colwise().sum().transpose();
  gw0 += lambda * (w0.array().colwise() * c.array()).matrix();
}

}  // namespace detail

// Reconstruction MSE + lambda_c * contractive penalty, mean over the batch.
template <class T>
T cae_loss(const CaeModelT<T>& model, const Matrix<T>& x) {
  ForwardTrace<T> trace = forward_trace(model.net, x);
  T recon = (trace.output - x).array().square().sum() / static_cast<T>(x.size());
  if (model.contractive_coeff == T(0)) return recon;
  return recon + model.contractive_coeff *
                     detail::contractive_penalty_from_hidden(trace.post[0],
                                                             model.net.weights[0]);
}

// Gradient of cae_loss w.r.t. every weight and bias of the model.
template <class T>
GradientSet<T> cae_backward(const CaeModelT<T>& model, const Matrix<T>& x) {
  ForwardTrace<T> trace = forward_trace(model.net, x);
  Matrix<T> grad_post = T(2) * (trace.output - x) / static_cast<T>(x.size());
  GradientSet<T> grads = backward_from_trace(model.net, x, trace, grad_post);
  if (model.contractive_coeff != T(0)) {
    detail::add_contractive_grads(x, trace.post[0], model.net.weights[0],
                                  model.contractive_coeff, grads.weights[0],
                                  grads.biases[0]);
  }
  return grads;
}

// Algorithm-1 inner loop: Adam steps over the targets (seeded shuffled order,
// one step per target per epoch) until the mean reconstruction cosine reaches
// the threshold and every target clears the per-chunk floor, or max_epochs is
// spent. On non-convergence the model with the best observed mean is kept.
// Codes are recomputed from the returned model, so re-encoding a target
// reproduces its stored code bit-exactly.
ConsolidationResult consolidate(CaeModel& model,
                                const std::vector<std::vector<float>>& targets,
                                const ConsolidationConfig& cfg);

}  // namespace selfnet
