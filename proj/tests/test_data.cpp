#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "selfnet/data.hpp"
#include "selfnet/errors.hpp"

using namespace selfnet;
namespace fs = std::filesystem;

namespace {

bool same_matrix(const MatrixF& a, const MatrixF& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

void append_be_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

std::string idx_images(std::uint32_t magic, std::uint32_t n, std::uint32_t rows,
                       std::uint32_t cols, const std::vector<unsigned char>& pixels) {
  std::string out;
  append_be_u32(out, magic);
  append_be_u32(out, n);
  append_be_u32(out, rows);
  append_be_u32(out, cols);
  out.append(pixels.begin(), pixels.end());
  return out;
}

std::string idx_labels(std::uint32_t magic, std::uint32_t n,
                       const std::vector<unsigned char>& labels) {
  std::string out;
  append_be_u32(out, magic);
  append_be_u32(out, n);
  out.append(labels.begin(), labels.end());
  return out;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("selfnet-data-test-" + std::to_string(std::rand()) +
            std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& bytes) const {
    fs::path p = path / name;
    std::ofstream f(p, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    return p;
  }
};

const std::vector<unsigned char> kPixels = {0,   51,  102, 153, 204, 255, 0,   25,
                                            7,   14,  21,  28,  100, 110, 120, 130};
const std::vector<unsigned char> kLabels = {5, 0, 9, 3};

// 10-class marker dataset: column 0 carries the class, column 1 the base row
// index, so task construction can be audited row by row.
Dataset marker_base(int per_class, std::uint64_t salt) {
  Dataset ds;
  const int n = 10 * per_class;
  ds.class_count = 10;
  ds.inputs.resize(n, 3);
  ds.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int cls = i % 10;
    ds.inputs(i, 0) = static_cast<float>(cls) / 10.0f;
    ds.inputs(i, 1) = static_cast<float>(i) / static_cast<float>(2 * n);
    ds.inputs(i, 2) = static_cast<float>(salt % 97) / 100.0f;
    ds.labels[static_cast<std::size_t>(i)] = cls;
  }
  return ds;
}

int marker_class(const Dataset& ds, Eigen::Index row) {
  return static_cast<int>(std::lround(ds.inputs(row, 0) * 10.0f));
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("idx loader parses a well-formed pair") {
  TempDir tmp;
  auto img = tmp.write("img", idx_images(0x00000803u, 4, 2, 2, kPixels));
  auto lab = tmp.write("lab", idx_labels(0x00000801u, 4, kLabels));

  Dataset ds = load_mnist_idx(img, lab);
  CHECK(ds.size() == 4);
  CHECK(ds.dim() == 4);
  CHECK(ds.class_count == 10);
  CHECK(ds.labels == std::vector<int>{5, 0, 9, 3});
  CHECK(ds.inputs(0, 0) == 0.0f);
  CHECK(ds.inputs(0, 1) == 51.0f / 255.0f);
  CHECK(ds.inputs(1, 1) == 1.0f);
  CHECK(ds.inputs.minCoeff() >= 0.0f);
  CHECK(ds.inputs.maxCoeff() <= 1.0f);
  CHECK_NOTHROW(ds.validate());
}

TEST_CASE("idx loader rejects a labels file carrying the image magic") {
  TempDir tmp;
  auto img = tmp.write("img", idx_images(0x00000803u, 4, 2, 2, kPixels));
  auto lab = tmp.write("lab", idx_labels(0x00000803u, 4, kLabels));
  try {
    load_mnist_idx(img, lab);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("expected 0x00000801") != std::string::npos);
  }
}

TEST_CASE("idx loader rejects an images file with the wrong magic") {
  TempDir tmp;
  auto img = tmp.write("img", idx_images(0x00000801u, 4, 2, 2, kPixels));
  auto lab = tmp.write("lab", idx_labels(0x00000801u, 4, kLabels));
  try {
    load_mnist_idx(img, lab);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("expected 0x00000803") != std::string::npos);
  }
}

TEST_CASE("idx loader flags image/label count mismatch") {
  TempDir tmp;
  auto img = tmp.write("img", idx_images(0x00000803u, 4, 2, 2, kPixels));
  auto lab = tmp.write("lab", idx_labels(0x00000801u, 3, {5, 0, 9}));
  CHECK_THROWS_AS(load_mnist_idx(img, lab), IntegrityError);
}

TEST_CASE("idx loader flags truncated payloads and headers") {
  TempDir tmp;
  auto lab = tmp.write("lab", idx_labels(0x00000801u, 4, kLabels));

  std::vector<unsigned char> short_pixels(kPixels.begin(), kPixels.end() - 1);
  auto img_short = tmp.write("img-short", idx_images(0x00000803u, 4, 2, 2, short_pixels));
  CHECK_THROWS_AS(load_mnist_idx(img_short, lab), FormatError);

  auto img_header = tmp.write("img-hdr", std::string("\x00\x00\x08\x03\x00", 5));
  CHECK_THROWS_AS(load_mnist_idx(img_header, lab), FormatError);

  auto img = tmp.write("img", idx_images(0x00000803u, 4, 2, 2, kPixels));
  auto lab_short = tmp.write("lab-short", idx_labels(0x00000801u, 4, {5, 0}));
  CHECK_THROWS_AS(load_mnist_idx(img, lab_short), FormatError);
}

TEST_CASE("idx loader rejects out-of-range labels and missing files") {
  TempDir tmp;
  auto img = tmp.write("img", idx_images(0x00000803u, 4, 2, 2, kPixels));
  auto lab_bad = tmp.write("lab-bad", idx_labels(0x00000801u, 4, {5, 12, 9, 3}));
  CHECK_THROWS_AS(load_mnist_idx(img, lab_bad), FormatError);
  CHECK_THROWS_AS(load_mnist_idx(tmp.path / "nope", tmp.path / "nope2"), NotFoundError);
}

TEST_CASE("idx loader agrees with an independent byte-level read of real MNIST") {
  const char* dir = std::getenv("SELFNET_DATA_DIR");
  if (dir == nullptr) return;  // real-data oracle only runs when MNIST is present
  fs::path img = fs::path(dir) / "train-images-idx3-ubyte";
  fs::path lab = fs::path(dir) / "train-labels-idx1-ubyte";
  if (!fs::exists(img)) img = fs::path(dir) / "train-images.idx3-ubyte";
  if (!fs::exists(lab)) lab = fs::path(dir) / "train-labels.idx1-ubyte";
  if (!fs::exists(img) || !fs::exists(lab)) return;

  Dataset ds = load_mnist_idx(img, lab);
  CHECK(ds.size() == 60000);
  CHECK(ds.dim() == 784);
  CHECK(ds.labels[0] == 5);  // first train label of the canonical set

  // independent read: raw offsets, no shared parser code
  std::ifstream fimg(img, std::ios::binary);
  fimg.seekg(16);
  std::vector<unsigned char> raw(784);
  fimg.read(reinterpret_cast<char*>(raw.data()), 784);
  int raw_nonzero = 0;
  int parsed_nonzero = 0;
  for (int j = 0; j < 784; ++j) {
    if (raw[static_cast<std::size_t>(j)] != 0) ++raw_nonzero;
    if (ds.inputs(0, j) != 0.0f) ++parsed_nonzero;
    CHECK(ds.inputs(0, j) == static_cast<float>(raw[static_cast<std::size_t>(j)]) / 255.0f);
  }
  CHECK(parsed_nonzero == raw_nonzero);
}

TEST_CASE("permuted task: seed 0 with full sizes reproduces the base") {
  Dataset train = marker_base(6, 1);
  Dataset test = marker_base(3, 2);
  TaskSpec t = make_permuted_task(train, test, 0, 0, 0);
  CHECK(same_matrix(t.train.inputs, train.inputs));
  CHECK(same_matrix(t.test.inputs, test.inputs));
  CHECK(t.train.labels == train.labels);
  CHECK(t.test.labels == test.labels);
  CHECK(t.class_count == 10);
}

TEST_CASE("permuted task: same seed twice gives identical tasks") {
  Dataset train = marker_base(6, 1);
  Dataset test = marker_base(3, 2);
  TaskSpec a = make_permuted_task(train, test, 1234, 40, 20);
  TaskSpec b = make_permuted_task(train, test, 1234, 40, 20);
  CHECK(same_matrix(a.train.inputs, b.train.inputs));
  CHECK(same_matrix(a.test.inputs, b.test.inputs));
  CHECK(a.train.labels == b.train.labels);
  CHECK(a.train.size() == 40);
  CHECK(a.test.size() == 20);
}

TEST_CASE("permuted task: different seeds move most of the 784 pixels") {
  // single ramp image makes the applied permutation directly readable
  Dataset base;
  base.class_count = 10;
  base.inputs.resize(1, 784);
  for (int j = 0; j < 784; ++j) base.inputs(0, j) = static_cast<float>(j) / 784.0f;
  base.labels = {0};

  auto recover = [&](std::uint64_t seed) {
    TaskSpec t = make_permuted_task(base, base, seed, 0, 0);
    std::vector<int> perm(784);
    for (int j = 0; j < 784; ++j) {
      perm[static_cast<std::size_t>(j)] =
          static_cast<int>(std::lround(t.train.inputs(0, j) * 784.0f));
    }
    return perm;
  };

  std::vector<int> p1 = recover(1);
  std::vector<int> p2 = recover(2);
  CHECK(std::set<int>(p1.begin(), p1.end()).size() == 784);  // a real permutation
  int differing = 0;
  for (int j = 0; j < 784; ++j) {
    if (p1[static_cast<std::size_t>(j)] != p2[static_cast<std::size_t>(j)]) ++differing;
  }
  CHECK(differing >= 600);
}

TEST_CASE("permuted task: subsampling is order-preserving and duplicate-free") {
  Dataset train = marker_base(20, 1);  // 200 rows
  Dataset test = marker_base(5, 2);
  TaskSpec t = make_permuted_task(train, test, 0, 50, 0);  // identity permutation
  REQUIRE(t.train.size() == 50);
  float prev = -1.0f;
  for (Eigen::Index r = 0; r < t.train.size(); ++r) {
    const float marker = t.train.inputs(r, 1);  // base row index / (2N)
    CHECK(marker > prev);
    prev = marker;
    const int idx = static_cast<int>(std::lround(marker * 400.0f));
    CHECK(t.train.labels[static_cast<std::size_t>(r)] == idx % 10);
  }
}

TEST_CASE("split task: 1000 samples at mix 0.4 give 400 positives, tallied per class") {
  Dataset train = marker_base(500, 1);  // 5000 rows
  Dataset test = marker_base(250, 2);
  const std::vector<int> pos = {1};
  const std::vector<int> neg = {6, 7, 8, 9};
  TaskSpec t = make_split_task(train, test, pos, neg, 0.4, 1000, 500, 42);
  REQUIRE(t.train.size() == 1000);
  REQUIRE(t.test.size() == 500);
  CHECK(t.class_count == 2);

  int positives = 0;
  for (Eigen::Index r = 0; r < t.train.size(); ++r) {
    const int cls = marker_class(t.train, r);
    const int label = t.train.labels[static_cast<std::size_t>(r)];
    if (label == 1) {
      ++positives;
      CHECK(cls == 1);
    } else {
      CHECK((cls == 6 || cls == 7 || cls == 8 || cls == 9));
    }
  }
  CHECK(std::abs(positives - 400) <= 1);

  int test_positives = 0;
  for (Eigen::Index r = 0; r < t.test.size(); ++r) {
    if (t.test.labels[static_cast<std::size_t>(r)] == 1) ++test_positives;
  }
  CHECK(std::abs(test_positives - 200) <= 1);
}

TEST_CASE("split task: swapping pos/neg complements labels over the same samples") {
  Dataset train = marker_base(500, 1);
  Dataset test = marker_base(250, 2);
  TaskSpec a = make_split_task(train, test, {1}, {6, 7, 8, 9}, 0.4, 1000, 500, 42);
  TaskSpec b = make_split_task(train, test, {6, 7, 8, 9}, {1}, 0.6, 1000, 500, 42);
  CHECK(same_matrix(a.train.inputs, b.train.inputs));
  CHECK(same_matrix(a.test.inputs, b.test.inputs));
  for (std::size_t i = 0; i < a.train.labels.size(); ++i) {
    CHECK(a.train.labels[i] == 1 - b.train.labels[i]);
  }
  for (std::size_t i = 0; i < a.test.labels.size(); ++i) {
    CHECK(a.test.labels[i] == 1 - b.test.labels[i]);
  }
}

TEST_CASE("split task: determinism and input validation") {
  Dataset train = marker_base(500, 1);
  Dataset test = marker_base(250, 2);
  TaskSpec a = make_split_task(train, test, {2, 3}, {0, 5}, 0.4, 800, 400, 7);
  TaskSpec b = make_split_task(train, test, {2, 3}, {0, 5}, 0.4, 800, 400, 7);
  CHECK(same_matrix(a.train.inputs, b.train.inputs));
  CHECK(a.train.labels == b.train.labels);

  // class 1 holds 500 samples; 2000 at mix 0.4 needs 800 positives
  CHECK_THROWS_AS(make_split_task(train, test, {1}, {6, 7, 8, 9}, 0.4, 2000, 500, 42),
                  InputError);
  CHECK_THROWS_AS(make_split_task(train, test, {}, {6}, 0.4, 100, 50, 42), InputError);
  CHECK_THROWS_AS(make_split_task(train, test, {1, 6}, {6}, 0.4, 100, 50, 42), InputError);
  CHECK_THROWS_AS(make_split_task(train, test, {1}, {6}, 0.0, 100, 50, 42), InputError);
  CHECK_THROWS_AS(make_split_task(train, test, {1}, {6}, 1.0, 100, 50, 42), InputError);
}

TEST_CASE("synthetic task: uniform class prior, [0,1] range, determinism") {
  TaskSpec t = make_synthetic_task(7, 16, 4, 0.1, 100, 60);
  REQUIRE(t.train.size() == 100);
  REQUIRE(t.test.size() == 60);
  std::vector<int> train_counts(4, 0), test_counts(4, 0);
  for (int y : t.train.labels) ++train_counts[static_cast<std::size_t>(y)];
  for (int y : t.test.labels) ++test_counts[static_cast<std::size_t>(y)];
  for (int c = 0; c < 4; ++c) {
    CHECK(train_counts[static_cast<std::size_t>(c)] == 25);
    CHECK(test_counts[static_cast<std::size_t>(c)] == 15);
  }
  CHECK(t.train.inputs.minCoeff() >= 0.0f);
  CHECK(t.train.inputs.maxCoeff() <= 1.0f);
  CHECK(t.test.inputs.minCoeff() >= 0.0f);
  CHECK(t.test.inputs.maxCoeff() <= 1.0f);

  TaskSpec u = make_synthetic_task(7, 16, 4, 0.1, 100, 60);
  CHECK(same_matrix(t.train.inputs, u.train.inputs));
  CHECK(same_matrix(t.test.inputs, u.test.inputs));
  CHECK(t.train.labels == u.train.labels);

  TaskSpec v = make_synthetic_task(8, 16, 4, 0.1, 100, 60);
  CHECK_FALSE(same_matrix(t.train.inputs, v.train.inputs));
}

TEST_CASE("synthetic task rejects bad shapes") {
  CHECK_THROWS_AS(make_synthetic_task(1, 1, 2, 0.1, 100, 50), InputError);
  CHECK_THROWS_AS(make_synthetic_task(1, 8, 1, 0.1, 100, 50), InputError);
  CHECK_THROWS_AS(make_synthetic_task(1, 8, 3, 0.1, 100, 51), InputError);
}

TEST_CASE("stream: synthetic needs no base and is deterministic") {
  TaskStreamSpec spec;
  spec.kind = StreamKind::synthetic;
  spec.task_count = 3;
  spec.seed = 11;
  spec.train_n = 40;
  spec.test_n = 20;
  spec.synthetic_dims = 12;

  auto tasks = generate_stream(spec, nullptr, nullptr);
  REQUIRE(tasks.size() == 3);
  CHECK(tasks[0].task_id == "syn-000");
  CHECK(tasks[1].task_id == "syn-001");
  CHECK(tasks[2].task_id == "syn-002");
  CHECK_FALSE(same_matrix(tasks[0].train.inputs, tasks[1].train.inputs));

  auto again = generate_stream(spec, nullptr, nullptr);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    CHECK(same_matrix(tasks[i].train.inputs, again[i].train.inputs));
    CHECK(tasks[i].train.labels == again[i].train.labels);
  }
}

TEST_CASE("stream: MNIST kinds require base datasets") {
  TaskStreamSpec spec;
  spec.kind = StreamKind::split_mnist;
  spec.task_count = 2;
  CHECK_THROWS_AS(generate_stream(spec, nullptr, nullptr), InputError);
  spec.kind = StreamKind::permuted_mnist;
  CHECK_THROWS_AS(generate_stream(spec, nullptr, nullptr), InputError);
}

TEST_CASE("stream: split tuples are distinct and disjoint per task") {
  Dataset train = marker_base(200, 1);  // 2000 rows
  Dataset test = marker_base(60, 2);
  TaskStreamSpec spec;
  spec.kind = StreamKind::split_mnist;
  spec.task_count = 6;
  spec.seed = 3;
  spec.train_n = 200;
  spec.test_n = 100;

  auto tasks = generate_stream(spec, &train, &test);
  REQUIRE(tasks.size() == 6);
  std::set<std::string> compositions;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    CHECK(tasks[i].task_id == "split-00" + std::to_string(i));
    CHECK(tasks[i].class_count == 2);
    for (int y : tasks[i].train.labels) CHECK((y == 0 || y == 1));
    compositions.insert(tasks[i].composition);
  }
  CHECK(compositions.size() == tasks.size());  // tuples deduplicated
}

TEST_CASE("stream: permuted task zero starts from the identity permutation") {
  Dataset train = marker_base(30, 1);
  Dataset test = marker_base(10, 2);
  TaskStreamSpec spec;
  spec.kind = StreamKind::permuted_mnist;
  spec.task_count = 3;
  spec.seed = 5;
  spec.train_n = 0;  // full copies
  spec.test_n = 0;

  auto tasks = generate_stream(spec, &train, &test);
  REQUIRE(tasks.size() == 3);
  CHECK(tasks[0].task_id == "perm-000");
  CHECK(same_matrix(tasks[0].train.inputs, train.inputs));  // identity first
  CHECK_FALSE(same_matrix(tasks[1].train.inputs, train.inputs));
  CHECK_FALSE(same_matrix(tasks[1].train.inputs, tasks[2].train.inputs));

  auto again = generate_stream(spec, &train, &test);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    CHECK(same_matrix(tasks[i].train.inputs, again[i].train.inputs));
  }
}

}  // TEST_SUITE
