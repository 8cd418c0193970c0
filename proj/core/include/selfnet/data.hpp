#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "selfnet/network.hpp"

namespace selfnet {

struct Dataset {
  MatrixF inputs;           // [N x D], values in [0, 1]
  std::vector<int> labels;  // [N]
  int class_count = 0;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index dim() const { return inputs.cols(); }
  void validate() const;
};

// One task in a stream: data splits plus the objective needed to train and
// score a task network on it.
struct TaskSpec {
  std::string task_id;
  Dataset train;
  Dataset test;
  Head head = Head::softmax_ce;
  int class_count = 0;
  std::string composition;  // human-readable provenance (classes, seeds, mix)

  void validate() const;
};

// Standard IDX pair (big-endian): image magic 0x00000803 with dims
// [N, rows, cols] and u8 pixels scaled by 1/255; label magic 0x00000801.
Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path);

// Fixed seeded pixel permutation applied to every image. Seed 0 is reserved
// for the identity permutation. Subsampling is order-preserving, so
// (seed 0, full sizes) reproduces the base exactly.
TaskSpec make_permuted_task(const Dataset& train_base, const Dataset& test_base,
                            std::uint64_t perm_seed, std::size_t train_n,
                            std::size_t test_n);

// Binary task: label 1 for `positive` classes, 0 for `negative`, with a
// `mix` fraction of positives in both splits (±1 sample). Samples are drawn
// seeded without replacement per class pool and kept in base-index order.
TaskSpec make_split_task(const Dataset& train_base, const Dataset& test_base,
                         const std::vector<int>& positive,
                         const std::vector<int>& negative, double mix,
                         std::size_t train_n, std::size_t test_n, std::uint64_t seed);

// Seeded Gaussian clusters, one per class, rescaled into [0,1]. The CI path
// when no MNIST files are available.
TaskSpec make_synthetic_task(std::uint64_t seed, int dims, int class_count,
                             double cluster_spread, std::size_t train_n,
                             std::size_t test_n);

enum class StreamKind { permuted_mnist, split_mnist, synthetic };

StreamKind stream_kind_from_name(std::string_view name);
std::string_view stream_kind_name(StreamKind k);

struct TaskStreamSpec {
  StreamKind kind = StreamKind::synthetic;
  int task_count = 1;
  std::uint64_t seed = 0;
  std::size_t train_n = 2000;
  std::size_t test_n = 1000;
  int synthetic_dims = 784;
  int synthetic_classes = 2;
  double synthetic_spread = 0.1;
  double split_mix = 0.4;
};

// Generates the task sequence. MNIST kinds need both bases; synthetic needs
// neither. Task tuples / seeds are derived from spec.seed and recorded in
// each task's composition string.
std::vector<TaskSpec> generate_stream(const TaskStreamSpec& spec,
                                      const Dataset* train_base,
                                      const Dataset* test_base);

}  // namespace selfnet
