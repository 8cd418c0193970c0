#include <filesystem>

#include <benchmark/benchmark.h>

#include "selfnet/cae.hpp"
#include "selfnet/checkpoint.hpp"
#include "selfnet/losses.hpp"
#include "selfnet/param_vector.hpp"
#include "selfnet/rng.hpp"

namespace {

using namespace selfnet;

// 784-27-10 task network on a 64-sample minibatch: the per-step cost of the
// task-training loop
DenseNetwork<float> bench_net(std::uint64_t seed) {
  Rng rng(seed);
  return DenseNetwork<float>::glorot(
      make_mlp_arch({784, 27, 10}, Activation::relu, Head::softmax_ce), rng);
}

MatrixF bench_batch(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  MatrixF x(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      x(i, j) = static_cast<float>(rng.uniform());
    }
  }
  return x;
}

void bm_forward(benchmark::State& state) {
  const DenseNetwork<float> net = bench_net(1);
  const MatrixF x = bench_batch(64, 784, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(net, x));
  }
}
BENCHMARK(bm_forward);

void bm_backward(benchmark::State& state) {
  const DenseNetwork<float> net = bench_net(1);
  const MatrixF x = bench_batch(64, 784, 2);
  std::vector<int> labels(64);
  Rng rng(3);
  for (auto& l : labels) l = static_cast<int>(rng.uniform_index(10));
  for (auto _ : state) {
    benchmark::DoNotOptimize(backward(net, x, labels, Head::softmax_ce));
  }
}
BENCHMARK(bm_backward);

// one gradient evaluation of the contractive autoencoder on a buffer of
// weight chunks, the inner cost of consolidation
void bm_cae_backward(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  Rng rng(5);
  const CaeModel model = make_cae<float>(n, 32, 5, 1e-4f, rng);
  const MatrixF chunks = bench_batch(5, n, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cae_backward(model, chunks));
  }
}
BENCHMARK(bm_cae_backward)->Arg(1024)->Arg(21251);

void bm_cosine(benchmark::State& state) {
  const auto q = static_cast<Eigen::Index>(state.range(0));
  const MatrixF a = bench_batch(1, q, 7);
  const MatrixF b = bench_batch(1, q, 8);
  const std::vector<float> va(a.data(), a.data() + q);
  const std::vector<float> vb(b.data(), b.data() + q);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cosine_similarity(va, vb));
  }
}
BENCHMARK(bm_cosine)->Arg(21251);

void bm_split_reassemble(benchmark::State& state) {
  const DenseNetwork<float> net = bench_net(9);
  const ParamVector v = flatten(net);
  for (auto _ : state) {
    benchmark::DoNotOptimize(reassemble(split(v, 1024)));
  }
}
BENCHMARK(bm_split_reassemble);

void bm_checkpoint_roundtrip(benchmark::State& state) {
  const auto path = std::filesystem::temp_directory_path() / "selfnet-bench.ckpt";
  DenseNetwork<float> net = bench_net(11);
  ParamVector v = flatten(net);
  v.task_id = "bench";
  Rng rng(12);
  const std::vector<CheckpointItem> items = {v, make_cae<float>(1024, 32, 5, 1e-4f, rng)};
  for (auto _ : state) {
    save_checkpoint(path, items);
    benchmark::DoNotOptimize(load_checkpoint(path));
  }
  std::filesystem::remove(path);
}
BENCHMARK(bm_checkpoint_roundtrip);

}  // namespace

BENCHMARK_MAIN();
