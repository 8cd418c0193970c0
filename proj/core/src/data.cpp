#include "selfnet/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "selfnet/errors.hpp"
#include "selfnet/rng.hpp"

namespace selfnet {

void Dataset::validate() const {
  if (inputs.rows() == 0) throw InputError("dataset is empty");
  if (static_cast<Eigen::Index>(labels.size()) != inputs.rows()) {
    throw IntegrityError("dataset: " + std::to_string(inputs.rows()) + " rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  if (class_count <= 0) throw InputError("dataset: class_count must be positive");
  for (int y : labels) {
    if (y < 0 || y >= class_count) {
      throw IntegrityError("dataset: label " + std::to_string(y) + " out of range [0, " +
                           std::to_string(class_count) + ")");
    }
  }
}

void TaskSpec::validate() const {
  train.validate();
  test.validate();
  if (train.dim() != test.dim()) throw IntegrityError("task: train/test dim mismatch");
  if (class_count != train.class_count || class_count != test.class_count) {
    throw IntegrityError("task: class_count mismatch across splits");
  }
}

namespace {

std::uint32_t read_be_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError("truncated IDX file while reading " + what);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

// order-preserving seeded draw of `n` distinct indices from [0, pool_size)
std::vector<std::size_t> draw_sorted(std::size_t pool_size, std::size_t n, Rng& rng) {
  auto perm = rng.permutation(static_cast<std::uint32_t>(pool_size));
  std::vector<std::size_t> picked(perm.begin(), perm.begin() + n);
  std::sort(picked.begin(), picked.end());
  return picked;
}

Dataset take_rows(const Dataset& base, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), base.dim());
  out.labels.reserve(rows.size());
  out.class_count = base.class_count;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) =
        base.inputs.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(base.labels[rows[i]]);
  }
  return out;
}

Dataset subsample(const Dataset& base, std::size_t n, std::uint64_t seed) {
  const auto total = static_cast<std::size_t>(base.size());
  if (n == 0 || n == total) {
    Dataset copy = base;
    return copy;
  }
  if (n > total) {
    throw InputError("subsample: requested " + std::to_string(n) + " of " +
                     std::to_string(total) + " samples");
  }
  Rng rng(seed);
  return take_rows(base, draw_sorted(total, n, rng));
}

std::uint64_t class_set_hash(std::vector<int> classes) {
  std::sort(classes.begin(), classes.end());
  std::uint64_t h = 1469598103934665603ull;
  for (int c : classes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::string class_set_string(std::vector<int> classes) {
  std::sort(classes.begin(), classes.end());
  std::string s = "{";
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(classes[i]);
  }
  return s + "}";
}

// one split of a binary task: mix*n positives, rest negatives, base order
Dataset split_draw(const Dataset& base, const std::vector<int>& positive,
                   const std::vector<int>& negative, double mix, std::size_t n,
                   std::uint64_t seed) {
  const auto pos_n = static_cast<std::size_t>(std::lround(mix * static_cast<double>(n)));
  const std::size_t neg_n = n - pos_n;

  std::set<int> pos_set(positive.begin(), positive.end());
  std::set<int> neg_set(negative.begin(), negative.end());
  std::vector<std::size_t> pos_pool, neg_pool;
  for (std::size_t i = 0; i < static_cast<std::size_t>(base.size()); ++i) {
    if (pos_set.count(base.labels[i])) pos_pool.push_back(i);
    else if (neg_set.count(base.labels[i])) neg_pool.push_back(i);
  }
  if (pos_pool.size() < pos_n || neg_pool.size() < neg_n) {
    throw InputError("split task: need " + std::to_string(pos_n) + "+" +
                     std::to_string(neg_n) + " samples, pools have " +
                     std::to_string(pos_pool.size()) + "+" +
                     std::to_string(neg_pool.size()));
  }

  // pool RNG keyed by class-set content, not by role, so swapping pos/neg
  // (with complemented mix) selects the same underlying samples
  Rng pos_rng(derive_seed(seed, "split-pool", class_set_hash(positive)));
  Rng neg_rng(derive_seed(seed, "split-pool", class_set_hash(negative)));
  std::vector<std::size_t> rows;
  for (auto p : draw_sorted(pos_pool.size(), pos_n, pos_rng)) rows.push_back(pos_pool[p]);
  for (auto p : draw_sorted(neg_pool.size(), neg_n, neg_rng)) rows.push_back(neg_pool[p]);
  std::sort(rows.begin(), rows.end());

  Dataset out;
  out.inputs.resize(static_cast<Eigen::Index>(n), base.dim());
  out.class_count = 2;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) =
        base.inputs.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(pos_set.count(base.labels[rows[i]]) ? 1 : 0);
  }
  return out;
}

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw NotFoundError("cannot open images: " + images_path.string());
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw NotFoundError("cannot open labels: " + labels_path.string());

  const std::uint32_t img_magic = read_be_u32(img, "image magic");
  if (img_magic != 0x00000803u) {
    char msg[96];
    std::snprintf(msg, sizeof msg, "image magic 0x%08x, expected 0x00000803", img_magic);
    throw FormatError(msg);
  }
  const std::uint32_t n = read_be_u32(img, "image count");
  const std::uint32_t rows = read_be_u32(img, "row count");
  const std::uint32_t cols = read_be_u32(img, "column count");
  if (n == 0 || rows == 0 || cols == 0) throw FormatError("IDX image header with zero dim");

  const std::uint32_t lab_magic = read_be_u32(lab, "label magic");
  if (lab_magic != 0x00000801u) {
    char msg[96];
    std::snprintf(msg, sizeof msg, "label magic 0x%08x, expected 0x00000801", lab_magic);
    throw FormatError(msg);
  }
  const std::uint32_t label_n = read_be_u32(lab, "label count");
  if (label_n != n) {
    throw IntegrityError("IDX pair: " + std::to_string(n) + " images but " +
                         std::to_string(label_n) + " labels");
  }

  Dataset ds;
  ds.class_count = 10;
  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  ds.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::vector<unsigned char> row(dim);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!img.read(reinterpret_cast<char*>(row.data()),
                  static_cast<std::streamsize>(dim))) {
      throw FormatError("truncated IDX image data at image " + std::to_string(i));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<float>(row[j]) / 255.0f;
    }
  }
  std::vector<unsigned char> raw_labels(n);
  if (!lab.read(reinterpret_cast<char*>(raw_labels.data()), n)) {
    throw FormatError("truncated IDX label data");
  }
  ds.labels.reserve(n);
  for (unsigned char y : raw_labels) {
    if (y >= 10) throw FormatError("IDX label " + std::to_string(int(y)) + " out of range");
    ds.labels.push_back(static_cast<int>(y));
  }
  return ds;
}

TaskSpec make_permuted_task(const Dataset& train_base, const Dataset& test_base,
                            std::uint64_t perm_seed, std::size_t train_n,
                            std::size_t test_n) {
  train_base.validate();
  test_base.validate();
  if (train_base.dim() != test_base.dim()) {
    throw IntegrityError("permuted task: base dim mismatch");
  }
  TaskSpec task;
  task.task_id = "perm-s" + std::to_string(perm_seed);
  task.head = Head::softmax_ce;
  task.class_count = train_base.class_count;
  task.composition = "permutation_seed=" + std::to_string(perm_seed);

  task.train = subsample(train_base, train_n, derive_seed(perm_seed, "train-subsample"));
  task.test = subsample(test_base, test_n, derive_seed(perm_seed, "test-subsample"));

  if (perm_seed != 0) {
    const auto d = static_cast<std::uint32_t>(train_base.dim());
    Rng rng(derive_seed(perm_seed, "pixel-permutation"));
    auto perm = rng.permutation(d);
    for (Dataset* ds : {&task.train, &task.test}) {
      MatrixF permuted(ds->inputs.rows(), ds->inputs.cols());
      for (std::uint32_t j = 0; j < d; ++j) permuted.col(j) = ds->inputs.col(perm[j]);
      ds->inputs = std::move(permuted);
    }
  }
  return task;
}

TaskSpec make_split_task(const Dataset& train_base, const Dataset& test_base,
                         const std::vector<int>& positive,
                         const std::vector<int>& negative, double mix,
                         std::size_t train_n, std::size_t test_n, std::uint64_t seed) {
  train_base.validate();
  test_base.validate();
  if (positive.empty() || negative.empty()) {
    throw InputError("split task: class sets must be nonempty");
  }
  for (int p : positive) {
    if (std::find(negative.begin(), negative.end(), p) != negative.end()) {
      throw InputError("split task: class " + std::to_string(p) + " in both sets");
    }
  }
  if (mix <= 0.0 || mix >= 1.0) throw InputError("split task: mix must be in (0,1)");

  TaskSpec task;
  task.head = Head::softmax_ce;
  task.class_count = 2;
  task.task_id = "split-p" + class_set_string(positive);
  task.composition = "pos=" + class_set_string(positive) + " neg=" +
                     class_set_string(negative) + " mix=" + std::to_string(mix);
  task.train = split_draw(train_base, positive, negative, mix, train_n,
                          derive_seed(seed, "split-train"));
  task.test = split_draw(test_base, positive, negative, mix, test_n,
                         derive_seed(seed, "split-test"));
  return task;
}

TaskSpec make_synthetic_task(std::uint64_t seed, int dims, int class_count,
                             double cluster_spread, std::size_t train_n,
                             std::size_t test_n) {
  if (dims < 2) throw InputError("synthetic task: dims must be >= 2");
  if (class_count < 2) throw InputError("synthetic task: need >= 2 classes");
  if (train_n % class_count != 0 || test_n % class_count != 0) {
    throw InputError("synthetic task: sample counts must divide by class count");
  }
  Rng rng(derive_seed(seed, "synthetic"));

  // cluster centers kept at pairwise distance >= 3 by rejection
  std::vector<std::vector<double>> centers;
  for (int c = 0; c < class_count; ++c) {
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 1000) throw InputError("synthetic task: cannot separate centers");
      std::vector<double> center(dims);
      for (auto& v : center) v = rng.normal() * 2.0;
      bool ok = true;
      for (const auto& other : centers) {
        double d2 = 0;
        for (int i = 0; i < dims; ++i) d2 += (center[i] - other[i]) * (center[i] - other[i]);
        if (d2 < 9.0) {
          ok = false;
          break;
        }
      }
      if (ok) {
        centers.push_back(std::move(center));
        break;
      }
    }
  }

  const double sigma = cluster_spread * 3.0;
  auto fill = [&](Dataset& ds, std::size_t n) {
    ds.class_count = class_count;
    ds.inputs.resize(static_cast<Eigen::Index>(n), dims);
    ds.labels.resize(n);
    const std::size_t per_class = n / class_count;
    std::size_t row = 0;
    for (int c = 0; c < class_count; ++c) {
      for (std::size_t i = 0; i < per_class; ++i, ++row) {
        for (int j = 0; j < dims; ++j) {
          ds.inputs(static_cast<Eigen::Index>(row), j) =
              static_cast<float>(centers[c][j] + sigma * rng.normal());
        }
        ds.labels[row] = c;
      }
    }
    // seeded row shuffle so classes are not block-ordered
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    Dataset shuffled;
    shuffled.class_count = class_count;
    shuffled.inputs.resize(ds.inputs.rows(), ds.inputs.cols());
    shuffled.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      shuffled.inputs.row(static_cast<Eigen::Index>(i)) =
          ds.inputs.row(static_cast<Eigen::Index>(order[i]));
      shuffled.labels[i] = ds.labels[order[i]];
    }
    ds = std::move(shuffled);
  };

  TaskSpec task;
  task.task_id = "syn-s" + std::to_string(seed);
  task.head = Head::softmax_ce;
  task.class_count = class_count;
  task.composition = "synthetic seed=" + std::to_string(seed) +
                     " dims=" + std::to_string(dims) +
                     " classes=" + std::to_string(class_count) +
                     " spread=" + std::to_string(cluster_spread);
  fill(task.train, train_n);
  fill(task.test, test_n);

  // one affine rescale into [0,1], shared by both splits
  const float lo = std::min(task.train.inputs.minCoeff(), task.test.inputs.minCoeff());
  const float hi = std::max(task.train.inputs.maxCoeff(), task.test.inputs.maxCoeff());
  const float range = hi > lo ? hi - lo : 1.0f;
  task.train.inputs = (task.train.inputs.array() - lo) / range;
  task.test.inputs = (task.test.inputs.array() - lo) / range;
  return task;
}

StreamKind stream_kind_from_name(std::string_view name) {
  if (name == "permuted_mnist") return StreamKind::permuted_mnist;
  if (name == "split_mnist") return StreamKind::split_mnist;
  if (name == "synthetic") return StreamKind::synthetic;
  throw InputError("unknown stream kind: " + std::string(name));
}

std::string_view stream_kind_name(StreamKind k) {
  switch (k) {
    case StreamKind::permuted_mnist: return "permuted_mnist";
    case StreamKind::split_mnist: return "split_mnist";
    case StreamKind::synthetic: return "synthetic";
  }
  return "?";
}

namespace {

std::string stream_task_id(StreamKind kind, int index) {
  const char* prefix = kind == StreamKind::permuted_mnist ? "perm"
                       : kind == StreamKind::split_mnist  ? "split"
                                                          : "syn";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%03d", prefix, index);
  return buf;
}

}  // namespace

std::vector<TaskSpec> generate_stream(const TaskStreamSpec& spec,
                                      const Dataset* train_base,
                                      const Dataset* test_base) {
  if (spec.task_count < 1) throw InputError("stream: task_count must be >= 1");
  const bool needs_base = spec.kind != StreamKind::synthetic;
  if (needs_base && (!train_base || !test_base)) {
    throw InputError("stream: MNIST-based streams need loaded base datasets");
  }

  std::vector<TaskSpec> tasks;
  tasks.reserve(spec.task_count);

  if (spec.kind == StreamKind::split_mnist) {
    // seeded (pos, neg) tuples in the paper's 1-vs-4 shape, deduplicated
    Rng tuple_rng(derive_seed(spec.seed, "split-tuples"));
    std::set<std::vector<int>> seen;
    for (int i = 0; i < spec.task_count; ++i) {
      std::vector<int> digits;
      for (int attempt = 0;; ++attempt) {
        if (attempt >= 10000) throw InputError("stream: ran out of distinct split tuples");
        auto perm = tuple_rng.permutation(10);
        digits.assign(perm.begin(), perm.begin() + 5);
        std::vector<int> key(digits.begin(), digits.end());
        std::sort(key.begin() + 1, key.end());  // pos digit + sorted negatives
        if (seen.insert(key).second) break;
      }
      std::vector<int> pos = {digits[0]};
      std::vector<int> neg(digits.begin() + 1, digits.end());
      auto task = make_split_task(*train_base, *test_base, pos, neg, spec.split_mix,
                                  spec.train_n, spec.test_n,
                                  derive_seed(spec.seed, "split-task", i));
      task.task_id = stream_task_id(spec.kind, i);
      tasks.push_back(std::move(task));
    }
    return tasks;
  }

  for (int i = 0; i < spec.task_count; ++i) {
    TaskSpec task;
    if (spec.kind == StreamKind::permuted_mnist) {
      // first task is the identity permutation (original images)
      std::uint64_t perm_seed = i == 0 ? 0 : derive_seed(spec.seed, "permutation", i);
      if (i != 0 && perm_seed == 0) perm_seed = 1;
      task = make_permuted_task(*train_base, *test_base, perm_seed, spec.train_n,
                                spec.test_n);
    } else {
      task = make_synthetic_task(derive_seed(spec.seed, "synthetic-task", i),
                                 spec.synthetic_dims, spec.synthetic_classes,
                                 spec.synthetic_spread, spec.train_n, spec.test_n);
    }
    task.task_id = stream_task_id(spec.kind, i);
    tasks.push_back(std::move(task));
  }
  return tasks;
}

}  // namespace selfnet
