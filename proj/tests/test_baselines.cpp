#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "selfnet/baselines.hpp"
#include "selfnet/gradient_check.hpp"
#include "selfnet/losses.hpp"

using namespace selfnet;

namespace {

ArchDescriptor small_arch() {
  return make_mlp_arch({8, 6, 2}, Activation::tanh, Head::softmax_ce);
}

TaskSpec small_task(std::uint64_t seed) {
  TaskSpec spec = make_synthetic_task(seed, 8, 2, 0.1, 64, 32);
  spec.task_id = "seq-" + std::to_string(seed);
  return spec;
}

TrainSchedule quick_schedule(int epochs = 6) {
  TrainSchedule s;
  s.epochs = epochs;
  s.batch_size = 16;
  s.optimizer = OptimizerKind::adam;
  s.learning_rate = 1e-2f;
  s.seed = 31;
  return s;
}

// Fisher values in the same order as flatten(): per layer, row-major
// weights then bias.
std::vector<float> flat_fisher(const GradientSet<float>& f) {
  std::vector<float> out;
  for (std::size_t l = 0; l < f.weights.size(); ++l) {
    for (Eigen::Index r = 0; r < f.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < f.weights[l].cols(); ++c) {
        out.push_back(f.weights[l](r, c));
      }
    }
    for (Eigen::Index i = 0; i < f.biases[l].size(); ++i) out.push_back(f.biases[l](i));
  }
  return out;
}

template <class T>
PenaltyAnchorT<T> random_anchor(const DenseNetwork<T>& net, std::uint64_t seed,
                                bool with_fisher) {
  Rng rng(seed);
  PenaltyAnchorT<T> a;
  a.theta.resize(static_cast<std::size_t>(net.param_count()));
  for (auto& v : a.theta) v = static_cast<T>(rng.uniform(-0.5, 0.5));
  if (with_fisher) {
    a.fisher = GradientSet<T>::zeros_like(net);
    for (auto& w : a.fisher.weights) {
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        w.data()[i] = static_cast<T>(rng.uniform(0.0, 2.0));
      }
    }
    for (auto& b : a.fisher.biases) {
      for (Eigen::Index i = 0; i < b.size(); ++i) {
        b.data()[i] = static_cast<T>(rng.uniform(0.0, 2.0));
      }
    }
  }
  return a;
}

void check_penalty_fd(const PenaltyStateT<double>& state) {
  Rng rng(99);
  auto net = DenseNetwork<double>::glorot(
      make_mlp_arch({5, 4, 3}, Activation::sigmoid, Head::softmax_ce), rng);
  auto grads = GradientSet<double>::zeros_like(net);
  state.add_gradient(net, grads);
  auto report = detail::check_against_fd<double>(
      net, grads, [&](const DenseNetwork<double>& n) { return state.penalty(n); },
      1e-6, 1e-4);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-6);
}

}  // namespace

TEST_SUITE_BEGIN("baselines");

TEST_CASE("penalty kind names round-trip") {
  for (PenaltyKind k : {PenaltyKind::none, PenaltyKind::l2_all, PenaltyKind::l2_online,
                        PenaltyKind::ewc, PenaltyKind::ewc_online}) {
    CHECK(penalty_kind_from_name(penalty_kind_name(k)) == k);
  }
  CHECK(penalty_kind_from_name("sgd") == PenaltyKind::none);
  CHECK_THROWS_AS(penalty_kind_from_name("dropout"), InputError);
}

TEST_CASE("fisher diagonal is shape-congruent, finite, non-negative") {
  Rng rng(5);
  auto net = DenseNetwork<float>::glorot(small_arch(), rng);
  const TaskSpec spec = small_task(11);

  const FisherDiagonal fisher = fisher_diag(net, spec, 32);
  REQUIRE(fisher.values.weights.size() == net.weights.size());
  REQUIRE(fisher.values.biases.size() == net.biases.size());
  for (int l = 0; l < net.layer_count(); ++l) {
    CHECK(fisher.values.weights[l].rows() == net.weights[l].rows());
    CHECK(fisher.values.weights[l].cols() == net.weights[l].cols());
    CHECK(fisher.values.biases[l].size() == net.biases[l].size());
    CHECK((fisher.values.weights[l].array() >= 0.0f).all());
    CHECK((fisher.values.biases[l].array() >= 0.0f).all());
    CHECK(fisher.values.weights[l].allFinite());
    CHECK(fisher.values.biases[l].allFinite());
  }
}

TEST_CASE("fisher rejects bad sample counts and the regression head") {
  Rng rng(5);
  auto net = DenseNetwork<float>::glorot(small_arch(), rng);
  TaskSpec spec = small_task(11);

  CHECK_THROWS_AS(fisher_diag(net, spec, 0), InputError);
  CHECK_THROWS_AS(fisher_diag(net, spec, static_cast<std::size_t>(spec.train.size()) + 1),
                  InputError);

  spec.head = Head::linear_mse;
  CHECK_THROWS_AS(fisher_diag(net, spec, 8), InputError);
}

TEST_CASE("dead input unit has exactly zero Fisher on its first-layer weights") {
  Rng rng(7);
  auto net = DenseNetwork<float>::glorot(small_arch(), rng);
  TaskSpec spec = small_task(13);
  spec.train.inputs.col(3).setZero();

  const FisherDiagonal fisher =
      fisher_diag(net, spec, static_cast<std::size_t>(spec.train.size()));
  CHECK(fisher.values.weights[0].col(3).isZero(0.0f));
  // other columns carry signal
  CHECK(fisher.values.weights[0].col(0).cwiseAbs().maxCoeff() > 0.0f);
}

TEST_CASE("two-parameter logistic Fisher matches the explicit per-sample sum") {
  // single weight + bias, sigmoid output: p = sigmoid(w*x + b)
  auto arch = make_mlp_arch({1, 1}, Activation::identity, Head::sigmoid_bce);
  auto net = DenseNetwork<float>::zeros(arch);
  const double w = 0.7, b = -0.3;
  net.weights[0](0, 0) = static_cast<float>(w);
  net.biases[0](0) = static_cast<float>(b);

  const std::vector<double> xs = {0.1, 0.9, 0.5, 0.3};
  const std::vector<int> ys = {0, 1, 1, 0};
  TaskSpec spec;
  spec.task_id = "logistic";
  spec.head = Head::sigmoid_bce;
  spec.class_count = 2;
  spec.train.inputs = MatrixF(4, 1);
  spec.test.inputs = MatrixF(4, 1);
  for (int i = 0; i < 4; ++i) {
    spec.train.inputs(i, 0) = static_cast<float>(xs[i]);
    spec.test.inputs(i, 0) = static_cast<float>(xs[i]);
  }
  spec.train.labels = ys;
  spec.test.labels = ys;
  spec.train.class_count = 2;
  spec.test.class_count = 2;

  double fw = 0.0, fb = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-(w * xs[i] + b)));
    const double g = s - ys[i];  // d(-log p)/dz
    fw += (g * xs[i]) * (g * xs[i]);
    fb += g * g;
  }
  fw /= 4.0;
  fb /= 4.0;

  const FisherDiagonal fisher = fisher_diag(net, spec, 4);
  CHECK(fisher.values.weights[0](0, 0) == doctest::Approx(fw).epsilon(1e-5));
  CHECK(fisher.values.biases[0](0) == doctest::Approx(fb).epsilon(1e-5));
}

TEST_CASE("penalty values and gradients match finite differences") {
  Rng rng(99);
  auto net = DenseNetwork<double>::glorot(
      make_mlp_arch({5, 4, 3}, Activation::sigmoid, Head::softmax_ce), rng);

  SUBCASE("l2_all over two anchors") {
    PenaltyStateT<double> state;
    state.kind = PenaltyKind::l2_all;
    state.lambda_b = 0.05;
    state.anchors.push_back(random_anchor(net, 1, false));
    state.anchors.push_back(random_anchor(net, 2, false));
    check_penalty_fd(state);
  }
  SUBCASE("l2_online") {
    PenaltyStateT<double> state;
    state.kind = PenaltyKind::l2_online;
    state.lambda_b = 0.2;
    state.running = random_anchor(net, 3, false);
    check_penalty_fd(state);
  }
  SUBCASE("ewc over two anchors") {
    PenaltyStateT<double> state;
    state.kind = PenaltyKind::ewc;
    state.lambda_b = 0.8;
    state.anchors.push_back(random_anchor(net, 4, true));
    state.anchors.push_back(random_anchor(net, 5, true));
    check_penalty_fd(state);
  }
  SUBCASE("ewc_online") {
    PenaltyStateT<double> state;
    state.kind = PenaltyKind::ewc_online;
    state.lambda_b = 1.5;
    state.running = random_anchor(net, 6, true);
    check_penalty_fd(state);
  }
}

TEST_CASE("penalty is inert without anchors or with zero strength") {
  Rng rng(21);
  auto net = DenseNetwork<float>::glorot(small_arch(), rng);
  auto grads = GradientSet<float>::zeros_like(net);

  PenaltyState state;
  state.kind = PenaltyKind::ewc;
  state.lambda_b = 100.0f;
  CHECK(state.penalty(net) == 0.0f);  // no anchors yet
  state.add_gradient(net, grads);
  for (const auto& w : grads.weights) CHECK(w.isZero(0.0f));

  state.kind = PenaltyKind::l2_online;
  CHECK(state.penalty(net) == 0.0f);  // no running anchor yet
}

TEST_CASE("single task: every method matches plain SGD exactly") {
  const std::vector<TaskSpec> specs = {small_task(41)};
  const auto arch = small_arch();
  const auto schedule = quick_schedule();

  const auto plain = train_sequential(PenaltyKind::none, 0.0f, specs, arch, schedule);
  for (PenaltyKind k : {PenaltyKind::l2_all, PenaltyKind::l2_online, PenaltyKind::ewc,
                        PenaltyKind::ewc_online}) {
    const auto run = train_sequential(k, 100.0f, specs, arch, schedule, 32);
    REQUIRE(run.final_params.values.size() == plain.final_params.values.size());
    CHECK(run.final_params.values == plain.final_params.values);
    CHECK(run.accuracy == plain.accuracy);
  }
}

TEST_CASE("zero strength is bit-identical to plain SGD over a stream") {
  const std::vector<TaskSpec> specs = {small_task(51), small_task(52), small_task(53)};
  const auto arch = small_arch();
  const auto schedule = quick_schedule();

  const auto plain = train_sequential(PenaltyKind::none, 0.0f, specs, arch, schedule);
  for (PenaltyKind k : {PenaltyKind::l2_all, PenaltyKind::l2_online, PenaltyKind::ewc,
                        PenaltyKind::ewc_online}) {
    const auto run = train_sequential(k, 0.0f, specs, arch, schedule, 32);
    CHECK(run.final_params.values == plain.final_params.values);
    CHECK(run.accuracy == plain.accuracy);
  }
}

TEST_CASE("accuracy matrix is lower-triangular over the stream") {
  const std::vector<TaskSpec> specs = {small_task(61), small_task(62), small_task(63)};
  const auto run =
      train_sequential(PenaltyKind::l2_online, 1e-2f, specs, small_arch(), quick_schedule());

  REQUIRE(run.accuracy.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    REQUIRE(run.accuracy[t].size() == t + 1);
    for (double a : run.accuracy[t]) {
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
    }
  }
}

TEST_CASE("storage: online penalties keep one anchor, the others grow with tasks") {
  const std::vector<TaskSpec> specs = {small_task(71), small_task(72), small_task(73),
                                       small_task(74)};
  const auto arch = small_arch();
  const auto schedule = quick_schedule(3);

  const auto sgd = train_sequential(PenaltyKind::none, 0.0f, specs, arch, schedule);
  CHECK(sgd.final_state.stored_anchor_count() == 0);

  const auto l2 = train_sequential(PenaltyKind::l2_all, 1e-2f, specs, arch, schedule);
  CHECK(l2.final_state.stored_anchor_count() == 4);
  for (const auto& a : l2.final_state.anchors) CHECK(a.fisher.weights.empty());

  const auto ewc = train_sequential(PenaltyKind::ewc, 10.0f, specs, arch, schedule, 32);
  CHECK(ewc.final_state.stored_anchor_count() == 4);
  for (const auto& a : ewc.final_state.anchors) {
    REQUIRE(a.fisher.weights.size() == static_cast<std::size_t>(arch.layer_count()));
  }

  const auto l2o = train_sequential(PenaltyKind::l2_online, 1e-2f, specs, arch, schedule);
  CHECK(l2o.final_state.stored_anchor_count() == 1);

  const auto ewco = train_sequential(PenaltyKind::ewc_online, 10.0f, specs, arch, schedule, 32);
  CHECK(ewco.final_state.stored_anchor_count() == 1);
}

TEST_CASE("online EWC accumulates Fisher with the gamma discount") {
  const std::vector<TaskSpec> specs = {small_task(81), small_task(82)};
  const auto arch = small_arch();
  const auto schedule = quick_schedule();
  const std::size_t samples = 32;

  // reference Fishers from independently re-trained stage nets
  const auto stage1 =
      train_sequential(PenaltyKind::none, 0.0f, {specs[0]}, arch, schedule);
  auto net1 = unflatten(stage1.final_params, arch);
  const auto f1 = fisher_diag(net1, specs[0], samples);

  for (float gamma : {1.0f, 0.5f}) {
    const auto run = train_sequential(PenaltyKind::ewc_online, 0.0f, specs, arch,
                                      schedule, samples, gamma);
    REQUIRE(run.final_state.running.has_value());
    // lambda_b = 0 keeps the trajectory equal to SGD, so stage-2 weights are
    // reproducible from the plain run
    auto net2 = unflatten(run.final_params, arch);
    const auto f2 = fisher_diag(net2, specs[1], samples);

    const auto& acc = run.final_state.running->fisher;
    for (int l = 0; l < arch.layer_count(); ++l) {
      const MatrixF expect = f2.values.weights[l] + gamma * f1.values.weights[l];
      CHECK((acc.weights[l] - expect).cwiseAbs().maxCoeff() <= 1e-7f);
    }
  }
}

TEST_CASE("plain SGD forgets the first task") {
  // permuted variants of one base task force the shared first layer to remap
  const TaskSpec base = make_synthetic_task(91, 8, 4, 0.1, 96, 64);
  std::vector<TaskSpec> specs;
  for (std::uint64_t p : {0ull, 5ull, 9ull, 13ull, 17ull}) {
    specs.push_back(make_permuted_task(base.train, base.test, p, 96, 64));
  }
  const auto arch = make_mlp_arch({8, 6, 4}, Activation::tanh, Head::softmax_ce);
  TrainSchedule schedule = quick_schedule(12);

  const auto run = train_sequential(PenaltyKind::none, 0.0f, specs, arch, schedule);
  const double fresh = run.accuracy[0][0];
  const double after_stream = run.accuracy.back()[0];
  CHECK(fresh >= 0.9);
  CHECK(fresh - after_stream >= 0.1);
}

TEST_CASE("strong EWC pins high-Fisher weights across a strength sweep") {
  const std::vector<TaskSpec> specs = {small_task(95), small_task(96)};
  const auto arch = small_arch();
  TrainSchedule schedule = quick_schedule(10);
  schedule.optimizer = OptimizerKind::sgd;
  schedule.learning_rate = 1e-2f;

  std::vector<double> movement;
  for (float lambda_b : {0.0f, 30.0f, 300.0f}) {
    const auto run =
        train_sequential(PenaltyKind::ewc, lambda_b, specs, arch, schedule, 64);
    REQUIRE(run.final_state.anchors.size() == 2);
    const auto& theta1 = run.final_state.anchors[0].theta;
    const auto fisher = flat_fisher(run.final_state.anchors[0].fisher);

    // movement of the top-decile Fisher parameters between stage 1 and 2
    std::vector<float> sorted = fisher;
    std::sort(sorted.begin(), sorted.end());
    const float cutoff = sorted[sorted.size() * 9 / 10];
    REQUIRE(cutoff > 0.0f);
    double max_delta = 0.0;
    for (std::size_t i = 0; i < fisher.size(); ++i) {
      if (fisher[i] >= cutoff) {
        max_delta = std::max(
            max_delta,
            std::abs(double(run.final_params.values[i]) - double(theta1[i])));
      }
    }
    movement.push_back(max_delta);
  }
  CHECK(movement[0] > movement[1]);
  CHECK(movement[1] > movement[2]);
  CHECK(movement[2] < 0.1 * movement[0]);
}

TEST_CASE("streams must share the network shape") {
  std::vector<TaskSpec> specs = {small_task(97)};
  specs.push_back(make_synthetic_task(98, 6, 2, 0.1, 64, 32));
  CHECK_THROWS_AS(
      train_sequential(PenaltyKind::none, 0.0f, specs, small_arch(), quick_schedule()),
      InputError);
  CHECK_THROWS_AS(
      train_sequential(PenaltyKind::none, 0.0f, {}, small_arch(), quick_schedule()),
      InputError);
}

TEST_CASE("divergence reports the failing stage") {
  // an absurd penalty strength turns the stage-2 anchor pull into a gradient
  // explosion within a few steps
  const std::vector<TaskSpec> specs = {small_task(99), small_task(100)};
  TrainSchedule schedule = quick_schedule(3);
  schedule.optimizer = OptimizerKind::sgd;
  schedule.learning_rate = 1e-2f;

  try {
    train_sequential(PenaltyKind::l2_online, 1e20f, specs, small_arch(), schedule);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("stage 2") == 0);
  }
}

TEST_SUITE_END();
