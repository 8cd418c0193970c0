#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "selfnet/errors.hpp"

namespace selfnet {

enum class Activation { relu, sigmoid, tanh, identity };
enum class Head { softmax_ce, sigmoid_bce, linear_mse };

Activation activation_from_name(std::string_view name);
std::string_view activation_name(Activation a);
Head head_from_name(std::string_view name);
std::string_view head_name(Head h);

// Shape of a dense network: layer widths, one activation per weight layer,
// and the output head that fixes the loss and the final transform.
struct ArchDescriptor {
  std::vector<int> layer_dims;
  std::vector<Activation> activations;
  Head output_head = Head::softmax_ce;

  int layer_count() const { return static_cast<int>(layer_dims.size()) - 1; }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }

  // total parameter count = sum over layers of (in+1)*out
  long param_count() const {
    long n = 0;
    for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
      n += static_cast<long>(layer_dims[i] + 1) * layer_dims[i + 1];
    }
    return n;
  }

  void validate() const {
    if (layer_dims.size() < 2) {
      throw InputError("ArchDescriptor needs at least 2 layer dims");
    }
    for (int d : layer_dims) {
      if (d <= 0) throw InputError("ArchDescriptor layer dims must be positive");
    }
    if (activations.size() != layer_dims.size() - 1) {
      throw InputError("ArchDescriptor needs one activation per weight layer, got " +
                       std::to_string(activations.size()) + " for " +
                       std::to_string(layer_dims.size() - 1) + " layers");
    }
  }

  std::vector<std::uint32_t> dims_u32() const {
    return std::vector<std::uint32_t>(layer_dims.begin(), layer_dims.end());
  }

  bool operator==(const ArchDescriptor&) const = default;
};

// Conventional MLP: the given activation on hidden layers, identity on the
// output layer. Used both for task networks and for rebuilding a network
// from checkpointed layer dims.
ArchDescriptor make_mlp_arch(const std::vector<int>& layer_dims, Activation hidden,
                             Head head);

}  // namespace selfnet
