#include "selfnet/cae.hpp"

#include "selfnet/param_vector.hpp"

namespace selfnet {

ArchDescriptor make_cae_arch(int n, int h, int d) {
  if (n <= 0 || h <= 0 || d <= 0) {
    throw InputError("cae dims must be positive");
  }
  ArchDescriptor arch;
  arch.layer_dims = {n, h, d, h, n};
  arch.activations = {Activation::sigmoid, Activation::identity, Activation::sigmoid,
                      Activation::identity};
  arch.output_head = Head::linear_mse;
  arch.validate();
  return arch;
}

void LatentRecord::validate() const {
  if (chunk_size == 0) throw IntegrityError("latent record: zero chunk size");
  if (codes.empty()) throw IntegrityError("latent record: no codes");
  const std::uint64_t r = (original_len + chunk_size - 1) / chunk_size;
  if (r != codes.size()) {
    throw IntegrityError("latent record '" + task_id + "': " +
                         std::to_string(codes.size()) + " codes but q=" +
                         std::to_string(original_len) + ", n=" +
                         std::to_string(chunk_size) + " needs " + std::to_string(r));
  }
  const std::size_t d = codes.front().size();
  for (const auto& c : codes) {
    if (c.size() != d) throw IntegrityError("latent record: ragged code lengths");
  }
}

std::vector<float> encode_vec(const CaeModel& model, const std::vector<float>& x) {
  MatrixF row(1, static_cast<Eigen::Index>(x.size()));
  std::copy(x.begin(), x.end(), row.data());
  MatrixF e = encode(model, row);
  return std::vector<float>(e.data(), e.data() + e.size());
}

std::vector<float> decode_vec(const CaeModel& model, const std::vector<float>& e) {
  MatrixF row(1, static_cast<Eigen::Index>(e.size()));
  std::copy(e.begin(), e.end(), row.data());
  MatrixF x = decode(model, row);
  return std::vector<float>(x.data(), x.data() + x.size());
}

namespace {

struct GateStats {
  double mean = 0.0;
  double min = 0.0;
};

GateStats eval_gate(const CaeModel& model, const MatrixF& x) {
  MatrixF recon = decode(model, encode(model, x));
  GateStats g;
  g.min = 2.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double c = cosine_similarity(&x(r, 0), &recon(r, 0), static_cast<std::size_t>(x.cols()));
    g.mean += c;
    g.min = std::min(g.min, c);
  }
  g.mean /= static_cast<double>(x.rows());
  return g;
}

}  // namespace

ConsolidationResult consolidate(CaeModel& model,
                                const std::vector<std::vector<float>>& targets,
                                const ConsolidationConfig& cfg) {
  if (targets.empty()) throw InputError("consolidate: no targets");
  if (cfg.max_epochs < 1) throw InputError("consolidate: max_epochs must be >= 1");
  const auto n = static_cast<std::size_t>(model.input_dim());
  for (const auto& t : targets) {
    if (t.size() != n) {
      throw ShapeError("consolidate: target of length " + std::to_string(t.size()) +
                       ", model expects " + std::to_string(n));
    }
  }
  const auto k = static_cast<Eigen::Index>(targets.size());
  MatrixF x(k, static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < k; ++r) {
    std::copy(targets[r].begin(), targets[r].end(), x.data() + r * x.cols());
  }

  const double floor = cfg.cosine_threshold - cfg.chunk_floor_slack;
  ConsolidationResult result;
  auto opt = OptimizerState<float>::adam(cfg.learning_rate);

  GateStats gate = eval_gate(model, x);
  CaeModel best = model;
  GateStats best_gate = gate;

  int epoch = 0;
  bool converged = gate.mean >= cfg.cosine_threshold && gate.min >= floor;
  while (!converged && epoch < cfg.max_epochs) {
    ++epoch;
    Rng order_rng(derive_seed(cfg.shuffle_seed, "consolidation-epoch",
                              static_cast<std::uint64_t>(epoch)));
    auto order = order_rng.permutation(static_cast<std::uint32_t>(k));
    MatrixF row(1, x.cols());
    for (std::uint32_t idx : order) {
      row = x.row(idx);
      optimizer_step(opt, model.net, cae_backward(model, row));
    }
    gate = eval_gate(model, x);
    converged = gate.mean >= cfg.cosine_threshold && gate.min >= floor;
    if (gate.mean > best_gate.mean) {
      best = model;
      best_gate = gate;
    }
  }

  if (!converged) {
    model = best;  // keep the best mean seen, not whatever the last step left
    gate = best_gate;
  }
  result.converged = converged;
  result.epochs_run = epoch;
  result.mean_cosine = gate.mean;
  result.min_cosine = gate.min;

  MatrixF codes = encode(model, x);
  result.codes.reserve(targets.size());
  for (Eigen::Index r = 0; r < k; ++r) {
    result.codes.emplace_back(codes.data() + r * codes.cols(),
                              codes.data() + (r + 1) * codes.cols());
  }
  return result;
}

}  // namespace selfnet
