#include "selfnet/arch.hpp"

namespace selfnet {

Activation activation_from_name(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw InputError("unknown activation: " + std::string(name));
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

Head head_from_name(std::string_view name) {
  if (name == "softmax_ce") return Head::softmax_ce;
  if (name == "sigmoid_bce") return Head::sigmoid_bce;
  if (name == "linear_mse") return Head::linear_mse;
  throw InputError("unknown output head: " + std::string(name));
}

std::string_view head_name(Head h) {
  switch (h) {
    case Head::softmax_ce: return "softmax_ce";
    case Head::sigmoid_bce: return "sigmoid_bce";
    case Head::linear_mse: return "linear_mse";
  }
  return "?";
}

ArchDescriptor make_mlp_arch(const std::vector<int>& layer_dims, Activation hidden,
                             Head head) {
  ArchDescriptor arch;
  arch.layer_dims = layer_dims;
  arch.activations.assign(layer_dims.size() - 1, hidden);
  if (!arch.activations.empty()) arch.activations.back() = Activation::identity;
  arch.output_head = head;
  arch.validate();
  return arch;
}

}  // namespace selfnet
