#pragma once

#include <vector>

#include "selfnet/losses.hpp"

namespace selfnet {

struct GradientCheckReport {
  double max_rel_error = 0.0;
  int worst_layer = -1;
  long worst_flat_index = -1;  // row-major index within the worst layer's W, or
                               // W-size + i for bias entry i
  std::vector<double> per_layer_max;
  double tolerance = 0.0;
  bool passed = false;
};

namespace detail {

inline double rel_error(double a, double b) {
  double denom = std::abs(a) + std::abs(b);
  if (denom < 1e-6) denom = 1e-6;
  return std::abs(a - b) / denom;
}

// Central differences of `loss(net)` against a provided gradient set.
template <class T, class LossFn>
GradientCheckReport check_against_fd(DenseNetwork<T> net, const GradientSet<T>& grads,
                                     LossFn&& loss, double step, double tolerance) {
  GradientCheckReport report;
  report.tolerance = tolerance;
  report.per_layer_max.assign(net.layer_count(), 0.0);
  auto probe = [&](T& param, double analytic, int layer, long flat) {
    const T orig = param;
    param = orig + T(step);
    const double up = static_cast<double>(loss(net));
    param = orig - T(step);
    const double down = static_cast<double>(loss(net));
    param = orig;
    const double fd = (up - down) / (2.0 * step);
    const double err = rel_error(analytic, fd);
    if (err > report.per_layer_max[layer]) report.per_layer_max[layer] = err;
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_layer = layer;
      report.worst_flat_index = flat;
    }
  };
  for (int l = 0; l < net.layer_count(); ++l) {
    auto& w = net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        probe(w(r, c), static_cast<double>(grads.weights[l](r, c)), l,
              r * w.cols() + c);
      }
    }
    auto& b = net.biases[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      probe(b(i), static_cast<double>(grads.biases[l](i)), l, w.size() + i);
    }
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace detail

// Compares an explicit gradient set against central finite differences of the
// loss. Exposed separately so an instrumented (e.g. deliberately corrupted)
// gradient can be checked.
template <class T>
GradientCheckReport gradient_check_against(const DenseNetwork<T>& net,
                                           const Matrix<T>& batch,
                                           const std::vector<int>& labels, Head head,
                                           const GradientSet<T>& grads, double step,
                                           double tolerance) {
  return detail::check_against_fd<T>(
      net, grads,
      [&](const DenseNetwork<T>& n) { return compute_loss(n, batch, labels, head); },
      step, tolerance);
}

template <class T>
GradientCheckReport gradient_check_against(const DenseNetwork<T>& net,
                                           const Matrix<T>& batch,
                                           const Matrix<T>& targets, Head head,
                                           const GradientSet<T>& grads, double step,
                                           double tolerance) {
  return detail::check_against_fd<T>(
      net, grads,
      [&](const DenseNetwork<T>& n) { return compute_loss(n, batch, targets, head); },
      step, tolerance);
}

// Checks backward() against central finite differences of compute_loss.
// Double precision is recommended; with step 1e-5 smooth nets sit well below
// a 1e-4 relative-error tolerance.
template <class T>
GradientCheckReport gradient_check(const DenseNetwork<T>& net, const Matrix<T>& batch,
                                   const std::vector<int>& labels, Head head,
                                   double step = 1e-5, double tolerance = 1e-4) {
  return gradient_check_against(net, batch, labels, head,
                                backward(net, batch, labels, head), step, tolerance);
}

template <class T>
GradientCheckReport gradient_check(const DenseNetwork<T>& net, const Matrix<T>& batch,
                                   const Matrix<T>& targets, Head head,
                                   double step = 1e-5, double tolerance = 1e-4) {
  return gradient_check_against(net, batch, targets, head,
                                backward(net, batch, targets, head), step, tolerance);
}

}  // namespace selfnet
