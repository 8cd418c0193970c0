#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "selfnet/checkpoint.hpp"
#include "selfnet/param_vector.hpp"

using namespace selfnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  auto dir = fs::temp_directory_path() / "selfnet_codec_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

DenseNetwork<float> random_net(const std::vector<int>& dims, std::uint64_t seed) {
  Rng rng(seed);
  return DenseNetwork<float>::glorot(make_mlp_arch(dims, Activation::relu, Head::softmax_ce),
                                     rng);
}

}  // namespace

TEST_SUITE("codec") {

TEST_CASE("flatten uses layer-major, row-major, weights-then-bias order") {
  ArchDescriptor arch = make_mlp_arch({2, 2}, Activation::relu, Head::linear_mse);
  auto net = DenseNetwork<float>::zeros(arch);
  net.weights[0] << 1, 2, 3, 4;
  net.biases[0] << 5, 6;
  auto v = flatten(net);
  CHECK(v.values == std::vector<float>{1, 2, 3, 4, 5, 6});
  CHECK(v.arch_dims == std::vector<std::uint32_t>{2, 2});

  auto back = unflatten(v, arch);
  CHECK(back.weights[0] == net.weights[0]);
  CHECK(back.biases[0] == net.biases[0]);
}

TEST_CASE("flatten/unflatten round trip is bit-exact and preserves forward") {
  auto net = random_net({7, 5, 3}, 42);
  auto v = flatten(net);
  CHECK(v.size() == static_cast<std::size_t>(net.param_count()));
  auto back = unflatten(v, net.arch);
  for (int l = 0; l < net.layer_count(); ++l) {
    CHECK(back.weights[l] == net.weights[l]);
    CHECK(back.biases[l] == net.biases[l]);
  }
  Rng rng(1);
  MatrixF x(4, 7);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 7; ++c) x(r, c) = static_cast<float>(rng.normal());
  CHECK(forward(back, x) == forward(net, x));
}

TEST_CASE("nets differing in one weight flatten to vectors differing in one slot") {
  auto a = random_net({4, 3, 2}, 7);
  auto b = a;
  b.weights[1](0, 1) += 0.5f;
  auto va = flatten(a), vb = flatten(b);
  int diffs = 0;
  std::size_t where = 0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (va.values[i] != vb.values[i]) {
      ++diffs;
      where = i;
    }
  }
  CHECK(diffs == 1);
  // layer 0 block is (4+1)*3 = 15 values; entry (0,1) of layer 1 is next block + 1
  CHECK(where == 15 + 1);
}

TEST_CASE("unflatten rejects wrong lengths, naming both") {
  ParamVector v;
  v.values.assign(5, 1.0f);
  ArchDescriptor arch = make_mlp_arch({2, 2}, Activation::relu, Head::linear_mse);
  CHECK_THROWS_WITH_AS(unflatten(v, arch),
                       "unflatten: arch expects 6 values, got 5", ShapeError);
}

TEST_CASE("cosine similarity basics") {
  std::vector<float> a = {1, 2, 3};
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-6));
  std::vector<float> scaled = {2, 4, 6};
  CHECK(cosine_similarity(a, scaled) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(cosine_similarity(scaled, a) == doctest::Approx(1.0).epsilon(1e-6));
  std::vector<float> e1 = {1, 0}, e2 = {0, 1};
  CHECK(cosine_similarity(e1, e2) == doctest::Approx(0.0));
  std::vector<float> neg = {-1, -2, -3};
  CHECK(cosine_similarity(a, neg) == doctest::Approx(-1.0).epsilon(1e-6));

  std::vector<float> zero = {0, 0, 0};
  CHECK_THROWS_AS(cosine_similarity(a, zero), NumericError);
  std::vector<float> shorter = {1, 2};
  CHECK_THROWS_AS(cosine_similarity(a, shorter), ShapeError);
}

TEST_CASE("split: exact division, padding, and the CIFAR-style chunking") {
  ParamVector v;
  v.values = {1, 2, 3, 4, 5, 6};
  auto even = split(v, 3);
  CHECK(even.chunk_count() == 2);
  CHECK(even.pad_len == 0);
  CHECK(even.chunks[0] == std::vector<float>{1, 2, 3});
  CHECK(even.chunks[1] == std::vector<float>{4, 5, 6});

  v.values = {1, 2, 3, 4, 5, 6, 7};
  auto padded = split(v, 3);
  CHECK(padded.chunk_count() == 3);
  CHECK(padded.pad_len == 2);
  CHECK(padded.chunks[2] == std::vector<float>{7, 0, 0});
  CHECK(padded.original_len == 7);

  // 60k parameters at n=20442 -> 3 subvectors
  ParamVector big;
  big.values.assign(60000, 1.0f);
  auto cifar = split(big, 20442);
  CHECK(cifar.chunk_count() == 3);
  CHECK(cifar.pad_len == 3 * 20442 - 60000);

  CHECK_THROWS_AS(split(v, 0), InputError);
  ParamVector empty;
  CHECK_THROWS_AS(split(empty, 3), InputError);
}

TEST_CASE("split/reassemble is the identity for all q <= 50, n <= 10") {
  Rng rng(3);
  for (std::size_t q = 1; q <= 50; ++q) {
    ParamVector v;
    v.task_id = "t" + std::to_string(q);
    for (std::size_t i = 0; i < q; ++i)
      v.values.push_back(static_cast<float>(rng.normal()));
    for (std::size_t n = 1; n <= 10; ++n) {
      auto s = split(v, n);
      CHECK(s.chunk_count() == (q + n - 1) / n);
      for (const auto& c : s.chunks) CHECK(c.size() == n);
      // pad region is all zeros
      for (std::size_t i = n - s.pad_len; i < n; ++i)
        CHECK(s.chunks.back()[i] == 0.0f);
      auto back = reassemble(s);
      REQUIRE(back.values == v.values);
      CHECK(back.task_id == v.task_id);
    }
  }
}

TEST_CASE("reassemble ignores a perturbed pad region") {
  ParamVector v;
  v.values = {1, 2, 3, 4, 5};
  auto s = split(v, 3);
  REQUIRE(s.pad_len == 1);
  s.chunks.back().back() = 99.0f;
  CHECK(reassemble(s).values == v.values);
}

TEST_CASE("chunked reassembly preserves forward outputs bit-exactly") {
  auto net = random_net({20, 10, 4}, 11);  // q = 254
  auto v = flatten(net);
  auto s = split(v, 100);  // 3 chunks
  REQUIRE(s.chunk_count() == 3);
  auto back = unflatten(reassemble(s), net.arch);
  Rng rng(2);
  MatrixF x(5, 20);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 20; ++c) x(r, c) = static_cast<float>(rng.normal());
  CHECK(forward(back, x) == forward(net, x));
}

TEST_CASE("reassemble integrity checks") {
  ParamVector v;
  v.values = {1, 2, 3, 4, 5};
  auto s = split(v, 3);

  auto bad = s;
  bad.chunks.clear();
  CHECK_THROWS_AS(reassemble(bad), IntegrityError);

  bad = s;
  bad.chunks[1].pop_back();
  CHECK_THROWS_AS(reassemble(bad), IntegrityError);

  bad = s;
  bad.original_len = 9;  // > r*n = 6... also covers <= (r-1)*n boundary below
  CHECK_THROWS_AS(reassemble(bad), IntegrityError);
  bad.original_len = 3;  // would only need 1 chunk
  CHECK_THROWS_AS(reassemble(bad), IntegrityError);

  bad = s;
  bad.pad_len = 0;
  CHECK_THROWS_AS(reassemble(bad), IntegrityError);
}

TEST_CASE("fidelity report: full-vector cosine on unpadded values plus per-chunk") {
  std::vector<float> original = {1, 2, 3, 4, 5, 6, 7};
  auto rep = fidelity_report(original, original, 3, 0.997);
  CHECK(rep.cosine == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.per_chunk_cosines.size() == 3);
  CHECK(rep.passed);

  std::vector<float> off = original;
  off[0] = -10.0f;
  auto bad = fidelity_report(original, off, 3, 0.997);
  CHECK_FALSE(bad.passed);
  CHECK(bad.cosine < 0.997);
  CHECK(bad.per_chunk_cosines[0] < bad.per_chunk_cosines[1]);
}

TEST_CASE("checkpoint round trip is byte-exact across all item kinds") {
  auto path = temp_file("roundtrip.sfnt");

  auto net = random_net({784, 27, 23}, 5);  // ~21.8k params
  ParamVector pv = flatten(net);
  pv.task_id = "task-a";

  LatentRecord lr;
  lr.task_id = "task-b";
  lr.original_len = 21839;
  lr.chunk_size = 21839;
  lr.arch_dims = {784, 27, 23};
  lr.codes = {{0.25f, -1.5f, 3.0f, 0.125f, 9.0f}};

  Rng rng(8);
  CaeModel cae = make_cae<float>(6, 4, 2, 1e-4f, rng);

  save_checkpoint(path, {pv, lr, cae});
  auto items = load_checkpoint(path);
  REQUIRE(items.size() == 3);

  const auto& pv2 = std::get<ParamVector>(items[0]);
  CHECK(pv2.task_id == "task-a");
  CHECK(pv2.arch_dims == pv.arch_dims);
  REQUIRE(pv2.values.size() == pv.values.size());
  CHECK(pv2.values == pv.values);  // bit-identical
  auto reloaded = unflatten(pv2, net.arch);
  MatrixF x = MatrixF::Ones(1, 784);
  CHECK(forward(reloaded, x) == forward(net, x));

  const auto& lr2 = std::get<LatentRecord>(items[1]);
  CHECK(lr2.task_id == "task-b");
  CHECK(lr2.original_len == lr.original_len);
  CHECK(lr2.chunk_size == lr.chunk_size);
  CHECK(lr2.arch_dims == lr.arch_dims);
  CHECK(lr2.codes == lr.codes);

  const auto& cae2 = std::get<CaeModel>(items[2]);
  CHECK(cae2.contractive_coeff == cae.contractive_coeff);
  for (int l = 0; l < 4; ++l) {
    CHECK(cae2.net.weights[l] == cae.net.weights[l]);
    CHECK(cae2.net.biases[l] == cae.net.biases[l]);
  }

  // save -> load -> save writes identical bytes
  auto path2 = temp_file("roundtrip2.sfnt");
  save_checkpoint(path2, items);
  CHECK(file_bytes(path) == file_bytes(path2));
}

TEST_CASE("checkpoint rejects corruption instead of crashing") {
  auto path = temp_file("corrupt.sfnt");
  ParamVector pv;
  pv.task_id = "t";
  pv.values = {1.0f, 2.0f, 3.0f};
  save_checkpoint(path, {pv});
  const std::string good = file_bytes(path);

  auto write_bytes = [&](const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };

  SUBCASE("truncated") {
    write_bytes(good.substr(0, good.size() - 5));
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    write_bytes(good.substr(0, 3));
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  }
  SUBCASE("bad magic") {
    std::string bad = good;
    bad[0] = 'X';
    write_bytes(bad);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  }
  SUBCASE("unsupported version") {
    std::string bad = good;
    bad[4] = 9;
    write_bytes(bad);
    CHECK_THROWS_AS(load_checkpoint(path), VersionError);
  }
  SUBCASE("unknown item kind") {
    std::string bad = good;
    bad[10] = 7;  // kind byte of first item (magic 4 + version 2 + count 4)
    write_bytes(bad);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  }
  SUBCASE("trailing bytes") {
    write_bytes(good + "junk");
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(temp_file("nope.sfnt")), NotFoundError);
  }
}

TEST_CASE("checkpoint payload length must match metadata") {
  auto path = temp_file("paylen.sfnt");
  auto net = random_net({3, 2}, 1);
  ParamVector pv = flatten(net);
  pv.task_id = "x";
  save_checkpoint(path, {pv});
  std::string bytes = file_bytes(path);
  // payload length u64 sits after kind(1) + id(2+1) + ndims(2) + dims(8); flip it
  const std::size_t off = 4 + 2 + 4 + 1 + 2 + 1 + 2 + 8;
  bytes[off] = static_cast<char>(bytes[off] + 4);
  std::ofstream(path, std::ios::binary | std::ios::trunc)
      .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
}

TEST_CASE("inconsistent latent metadata is rejected") {
  LatentRecord lr;
  lr.task_id = "bad";
  lr.original_len = 10;
  lr.chunk_size = 3;  // needs 4 codes
  lr.codes = {{1.0f}, {2.0f}};
  CHECK_THROWS_AS(lr.validate(), IntegrityError);
  auto path = temp_file("badlatent.sfnt");
  CHECK_THROWS_AS(save_checkpoint(path, {lr}), IntegrityError);
}

}  // TEST_SUITE
