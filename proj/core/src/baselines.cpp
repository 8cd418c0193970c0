#include "selfnet/baselines.hpp"

#include <algorithm>
#include <cstdio>

#include "selfnet/losses.hpp"

namespace selfnet {

PenaltyKind penalty_kind_from_name(std::string_view name) {
  if (name == "none" || name == "sgd") return PenaltyKind::none;
  if (name == "l2_all") return PenaltyKind::l2_all;
  if (name == "l2_online") return PenaltyKind::l2_online;
  if (name == "ewc") return PenaltyKind::ewc;
  if (name == "ewc_online") return PenaltyKind::ewc_online;
  throw InputError("unknown penalty kind '" + std::string(name) + "'");
}

std::string_view penalty_kind_name(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::none: return "none";
    case PenaltyKind::l2_all: return "l2_all";
    case PenaltyKind::l2_online: return "l2_online";
    case PenaltyKind::ewc: return "ewc";
    case PenaltyKind::ewc_online: return "ewc_online";
  }
  throw InputError("unknown penalty kind value");
}

FisherDiagonal fisher_diag(const DenseNetwork<float>& net, const TaskSpec& spec,
                           std::size_t sample_count) {
  spec.validate();
  if (sample_count == 0) throw InputError("fisher_diag: sample_count must be positive");
  if (sample_count > static_cast<std::size_t>(spec.train.size())) {
    throw InputError("fisher_diag: sample_count exceeds train set size");
  }
  if (net.input_dim() != spec.train.dim()) {
    throw ShapeError("fisher_diag: network input dim does not match data");
  }
  if (spec.head == Head::linear_mse) {
    throw InputError("fisher_diag: linear_mse head has no label likelihood");
  }

  // With a single-sample batch, backward() returns the gradient of the
  // per-sample cross-entropy, i.e. minus the log-likelihood gradient; the
  // square is the same either way.
  FisherDiagonal fisher{GradientSet<float>::zeros_like(net)};
  for (std::size_t i = 0; i < sample_count; ++i) {
    const MatrixF x = spec.train.inputs.row(static_cast<Eigen::Index>(i));
    GradientSet<float> g;
    if (spec.head == Head::softmax_ce) {
      g = backward(net, x, std::vector<int>{spec.train.labels[i]}, spec.head);
    } else {
      MatrixF target(1, 1);
      target(0, 0) = static_cast<float>(spec.train.labels[i]);
      g = backward(net, x, target, spec.head);
    }
    for (int l = 0; l < net.layer_count(); ++l) {
      fisher.values.weights[l].array() += g.weights[l].array().square();
      fisher.values.biases[l].array() += g.biases[l].array().square();
    }
  }
  fisher.values.scale(1.0f / static_cast<float>(sample_count));
  return fisher;
}

void absorb_task(PenaltyState& state, const DenseNetwork<float>& net,
                 const TaskSpec& spec, std::size_t fisher_samples) {
  if (state.kind == PenaltyKind::none) return;

  PenaltyAnchorT<float> anchor;
  anchor.theta = flatten(net).values;
  const bool needs_fisher =
      state.kind == PenaltyKind::ewc || state.kind == PenaltyKind::ewc_online;
  if (needs_fisher) {
    const std::size_t count = std::min<std::size_t>(
        fisher_samples, static_cast<std::size_t>(spec.train.size()));
    anchor.fisher = fisher_diag(net, spec, count).values;
  }

  switch (state.kind) {
    case PenaltyKind::l2_all:
    case PenaltyKind::ewc:
      state.anchors.push_back(std::move(anchor));
      break;
    case PenaltyKind::l2_online:
      state.running = std::move(anchor);
      break;
    case PenaltyKind::ewc_online:
      if (state.running) {
        // running Fisher is a gamma-discounted sum; the anchor tracks the
        // latest solution
        for (std::size_t l = 0; l < anchor.fisher.weights.size(); ++l) {
          anchor.fisher.weights[l] +=
              state.gamma * state.running->fisher.weights[l];
          anchor.fisher.biases[l] += state.gamma * state.running->fisher.biases[l];
        }
      }
      state.running = std::move(anchor);
      break;
    case PenaltyKind::none:
      break;
  }
}

BaselineRunResult train_sequential(PenaltyKind kind, float lambda_b,
                                   const std::vector<TaskSpec>& specs,
                                   const ArchDescriptor& arch,
                                   const TrainSchedule& schedule,
                                   std::size_t fisher_samples, float gamma) {
  if (specs.empty()) throw InputError("train_sequential: no tasks");
  if (!(lambda_b >= 0.0f)) throw InputError("train_sequential: lambda_b must be >= 0");
  for (std::size_t t = 1; t < specs.size(); ++t) {
    if (specs[t].train.dim() != specs[0].train.dim() ||
        specs[t].class_count != specs[0].class_count ||
        specs[t].head != specs[0].head) {
      throw InputError("train_sequential: task '" + specs[t].task_id +
                       "' does not share the stream's input/output shape");
    }
  }

  PenaltyState state;
  state.kind = kind;
  state.lambda_b = lambda_b;
  state.gamma = gamma;

  BaselineRunResult result;
  ParamVector params;
  GradHook hook;
  if (kind != PenaltyKind::none) {
    hook = [&state](const DenseNetwork<float>& net, GradientSet<float>& grads) {
      state.add_gradient(net, grads);
    };
  }

  for (std::size_t t = 0; t < specs.size(); ++t) {
    TrainSchedule stage_schedule = schedule;
    stage_schedule.seed = derive_seed(schedule.seed, "baseline-task", t);

    TrainResult trained;
    try {
      trained = train_task(specs[t], arch, t == 0 ? nullptr : &params, {},
                           stage_schedule, hook);
    } catch (const DivergenceError& e) {
      char msg[64];
      std::snprintf(msg, sizeof msg, "stage %zu: ", t + 1);
      throw DivergenceError(msg + std::string(e.what()));
    }
    params = trained.params;

    std::vector<double> row;
    row.reserve(t + 1);
    for (std::size_t s = 0; s <= t; ++s) {
      row.push_back(evaluate(trained.net, specs[s]).accuracy);
    }
    result.accuracy.push_back(std::move(row));

    absorb_task(state, trained.net, specs[t], fisher_samples);
  }

  result.final_params = std::move(params);
  result.final_state = std::move(state);
  return result;
}

}  // namespace selfnet
