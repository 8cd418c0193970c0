#include "selfnet/task_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace selfnet {

namespace {

MatrixF gather_rows(const MatrixF& m, const std::vector<std::size_t>& order,
                    std::size_t begin, std::size_t end) {
  MatrixF out(static_cast<Eigen::Index>(end - begin), m.cols());
  for (std::size_t i = begin; i < end; ++i) {
    out.row(static_cast<Eigen::Index>(i - begin)) = m.row(static_cast<Eigen::Index>(order[i]));
  }
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<std::size_t>& order,
                               std::size_t begin, std::size_t end) {
  std::vector<int> out(end - begin);
  for (std::size_t i = begin; i < end; ++i) out[i - begin] = labels[order[i]];
  return out;
}

int argmax_row(const MatrixF& m, Eigen::Index r) {
  int best = 0;
  float best_v = m(r, 0);
  for (Eigen::Index c = 1; c < m.cols(); ++c) {
    if (m(r, c) > best_v) {
      best_v = m(r, c);
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace

TrainResult train_task(const TaskSpec& spec, const ArchDescriptor& arch,
                       const ParamVector* init, const AnchorConfig& anchor,
                       const TrainSchedule& schedule, const GradHook& extra_grads) {
  spec.validate();
  arch.validate();
  if (static_cast<Eigen::Index>(arch.layer_dims.front()) != spec.train.inputs.cols()) {
    throw ShapeError("train_task: arch expects input dim " +
                     std::to_string(arch.layer_dims.front()) + ", data has " +
                     std::to_string(spec.train.inputs.cols()));
  }
  if (arch.output_head == Head::softmax_ce &&
      arch.layer_dims.back() != spec.class_count) {
    throw ShapeError("train_task: arch has " + std::to_string(arch.layer_dims.back()) +
                     " outputs, task has " + std::to_string(spec.class_count) + " classes");
  }
  if (spec.head != arch.output_head) {
    throw InputError("train_task: task head " + std::string(head_name(spec.head)) +
                     " does not match arch head " + std::string(head_name(arch.output_head)));
  }
  if (spec.head != Head::softmax_ce) {
    throw InputError("train_task: only softmax_ce tasks are supported");
  }
  if (schedule.epochs < 0 || schedule.batch_size < 1) {
    throw InputError("train_task: invalid schedule");
  }

  DenseNetwork<float> net;
  if (init != nullptr) {
    net = unflatten(*init, arch);
  } else {
    Rng init_rng(derive_seed(schedule.seed, "task-init"));
    net = DenseNetwork<float>::glorot(arch, init_rng);
  }

  const bool anchored = anchor.lambda > 0.0f;
  if (anchored) detail::check_anchor_shape(net, anchor.source);
  if (!anchor.source.empty() && !anchored) {
    // source given but lambda == 0: legal, behaves exactly like no anchor
    detail::check_anchor_shape(net, anchor.source);
  }

  OptimizerState<float> opt;
  switch (schedule.optimizer) {
    case OptimizerKind::sgd:
      opt = OptimizerState<float>::sgd(schedule.learning_rate);
      break;
    case OptimizerKind::sgd_momentum:
      opt = OptimizerState<float>::sgd_momentum(schedule.learning_rate);
      break;
    case OptimizerKind::adam:
      opt = OptimizerState<float>::adam(schedule.learning_rate);
      break;
  }
  const std::size_t n = static_cast<std::size_t>(spec.train.inputs.rows());
  const std::size_t batch = static_cast<std::size_t>(schedule.batch_size);

  TrainResult result;
  result.epoch_losses.reserve(static_cast<std::size_t>(schedule.epochs));

  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(schedule.seed, "epoch-shuffle",
                                static_cast<std::uint64_t>(epoch)));
    const auto perm = shuffle_rng.permutation(static_cast<std::uint32_t>(n));
    const std::vector<std::size_t> order(perm.begin(), perm.end());

    double loss_sum = 0.0;
    std::size_t step_count = 0;
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const std::size_t end = std::min(begin + batch, n);
      const MatrixF x = gather_rows(spec.train.inputs, order, begin, end);
      const std::vector<int> y = gather_labels(spec.train.labels, order, begin, end);

      const ForwardTrace<float> trace = forward_trace(net, x);
      float ce = 0.0f;
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        float p = trace.output(r, y[static_cast<std::size_t>(r)]);
        p = std::min(std::max(p, float(kProbClamp)), float(1.0 - kProbClamp));
        ce -= std::log(p);
      }
      double loss = static_cast<double>(ce / static_cast<float>(x.rows()));
      GradientSet<float> grads =
          backward_from_trace(net, x, trace, detail::head_gradient(trace, y));
      if (anchored) {
        loss += anchor_penalty(net, anchor.source, anchor.lambda);
        add_anchor_gradient(net, anchor.source, anchor.lambda, grads);
      }
      if (extra_grads) extra_grads(net, grads);

      if (!std::isfinite(loss)) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch + 1) +
                              ": non-finite loss");
      }
      try {
        optimizer_step(opt, net, grads);
      } catch (const NumericError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch + 1) +
                              ": " + e.what());
      }
      loss_sum += loss;
      ++step_count;
    }
    result.epoch_losses.push_back(step_count > 0 ? loss_sum / static_cast<double>(step_count)
                                                 : 0.0);
  }

  result.train_accuracy = evaluate(net, spec.train).accuracy;
  result.params = flatten(net);
  result.params.task_id = spec.task_id;
  result.net = std::move(net);
  return result;
}

EvalResult evaluate(const DenseNetwork<float>& net, const Dataset& data) {
  data.validate();
  if (static_cast<Eigen::Index>(net.arch.layer_dims.front()) != data.inputs.cols()) {
    throw ShapeError("evaluate: arch expects input dim " +
                     std::to_string(net.arch.layer_dims.front()) + ", data has " +
                     std::to_string(data.inputs.cols()));
  }
  if (net.arch.output_head == Head::linear_mse) {
    throw InputError("evaluate: linear_mse head has no class accuracy");
  }

  const Eigen::Index n = data.inputs.rows();
  constexpr Eigen::Index kEvalBatch = 512;
  std::size_t correct = 0;
  double loss_sum = 0.0;
  for (Eigen::Index begin = 0; begin < n; begin += kEvalBatch) {
    const Eigen::Index rows = std::min(kEvalBatch, n - begin);
    const MatrixF x = data.inputs.middleRows(begin, rows);
    const ForwardTrace<float> trace = forward_trace(net, x);
    const MatrixF& out = trace.output;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const int truth = data.labels[static_cast<std::size_t>(begin + r)];
      int predicted;
      if (net.arch.output_head == Head::softmax_ce) {
        predicted = argmax_row(out, r);
        const float p = std::max(out(r, truth), 1e-12f);
        loss_sum -= std::log(static_cast<double>(p));
      } else {  // sigmoid_bce: single unit, threshold at 0.5
        if (out.cols() != 1) {
          throw ShapeError("evaluate: sigmoid_bce accuracy expects 1 output column");
        }
        const double p = std::clamp(static_cast<double>(out(r, 0)), 1e-12, 1.0 - 1e-12);
        predicted = p >= 0.5 ? 1 : 0;
        loss_sum -= truth == 1 ? std::log(p) : std::log(1.0 - p);
      }
      if (predicted == truth) ++correct;
    }
  }

  EvalResult result;
  result.accuracy = n > 0 ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
  result.loss = n > 0 ? loss_sum / static_cast<double>(n) : 0.0;
  return result;
}

ParamVector mean_params(const std::vector<ParamVector>& vectors) {
  if (vectors.empty()) throw InputError("mean_params: no vectors");
  const auto& first = vectors.front();
  for (const auto& v : vectors) {
    if (v.values.size() != first.values.size() || v.arch_dims != first.arch_dims) {
      throw InputError("mean_params: mixed architectures");
    }
  }
  ParamVector mean;
  mean.arch_dims = first.arch_dims;
  mean.values.resize(first.values.size());
  const double inv = 1.0 / static_cast<double>(vectors.size());
  for (std::size_t i = 0; i < first.values.size(); ++i) {
    double sum = 0.0;
    for (const auto& v : vectors) sum += v.values[i];
    mean.values[i] = static_cast<float>(sum * inv);
  }
  return mean;
}

}  // namespace selfnet
