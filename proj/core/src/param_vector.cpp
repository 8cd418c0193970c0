#include "selfnet/param_vector.hpp"

#include <cmath>

namespace selfnet {

ParamVector flatten(const DenseNetwork<float>& net) {
  ParamVector v;
  v.values.reserve(static_cast<std::size_t>(net.param_count()));
  for (int l = 0; l < net.layer_count(); ++l) {
    const auto& w = net.weights[l];  // row-major storage
    v.values.insert(v.values.end(), w.data(), w.data() + w.size());
    const auto& b = net.biases[l];
    v.values.insert(v.values.end(), b.data(), b.data() + b.size());
  }
  v.arch_dims = net.arch.dims_u32();
  return v;
}

DenseNetwork<float> unflatten(const ParamVector& v, const ArchDescriptor& arch) {
  arch.validate();
  const auto expected = static_cast<std::size_t>(arch.param_count());
  if (v.values.size() != expected) {
    throw ShapeError("unflatten: arch expects " + std::to_string(expected) +
                     " values, got " + std::to_string(v.values.size()));
  }
  auto net = DenseNetwork<float>::zeros(arch);
  const float* src = v.values.data();
  for (int l = 0; l < net.layer_count(); ++l) {
    auto& w = net.weights[l];
    std::copy(src, src + w.size(), w.data());
    src += w.size();
    auto& b = net.biases[l];
    std::copy(src, src + b.size(), b.data());
    src += b.size();
  }
  return net;
}

double cosine_similarity(const float* a, const float* b, std::size_t len) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) {
    throw NumericError("cosine similarity undefined for a zero-norm vector");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine: length mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  return cosine_similarity(a.data(), b.data(), a.size());
}

SubvectorSet split(const ParamVector& v, std::size_t chunk_size) {
  if (chunk_size == 0) throw InputError("split: chunk size must be positive");
  if (v.values.empty()) throw InputError("split: empty parameter vector");
  const std::size_t q = v.values.size();
  const std::size_t r = (q + chunk_size - 1) / chunk_size;
  SubvectorSet s;
  s.original_len = q;
  s.pad_len = r * chunk_size - q;
  s.arch_dims = v.arch_dims;
  s.task_id = v.task_id;
  s.chunks.reserve(r);
  for (std::size_t c = 0; c < r; ++c) {
    std::vector<float> chunk(chunk_size, 0.0f);
    const std::size_t begin = c * chunk_size;
    const std::size_t count = std::min(chunk_size, q - begin);
    std::copy(v.values.begin() + begin, v.values.begin() + begin + count, chunk.begin());
    s.chunks.push_back(std::move(chunk));
  }
  return s;
}

ParamVector reassemble(const SubvectorSet& s) {
  if (s.chunks.empty()) throw IntegrityError("reassemble: no chunks");
  const std::size_t n = s.chunks.front().size();
  if (n == 0) throw IntegrityError("reassemble: zero-length chunks");
  for (const auto& c : s.chunks) {
    if (c.size() != n) throw IntegrityError("reassemble: ragged chunk sizes");
  }
  const std::size_t r = s.chunks.size();
  const std::size_t q = s.original_len;
  if (q > r * n || q <= (r - 1) * n) {
    throw IntegrityError("reassemble: original_len " + std::to_string(q) +
                         " inconsistent with " + std::to_string(r) + " chunks of " +
                         std::to_string(n));
  }
  if (s.pad_len != r * n - q) {
    throw IntegrityError("reassemble: pad_len " + std::to_string(s.pad_len) +
                         " should be " + std::to_string(r * n - q));
  }
  ParamVector v;
  v.arch_dims = s.arch_dims;
  v.task_id = s.task_id;
  v.values.reserve(q);
  for (std::size_t c = 0; c < r; ++c) {
    const std::size_t begin = c * n;
    const std::size_t count = std::min(n, q - begin);
    v.values.insert(v.values.end(), s.chunks[c].begin(), s.chunks[c].begin() + count);
  }
  return v;
}

FidelityReport fidelity_report(const std::vector<float>& original,
                               const std::vector<float>& reconstructed,
                               std::size_t chunk_size, double threshold) {
  if (original.size() != reconstructed.size()) {
    throw ShapeError("fidelity: length mismatch");
  }
  FidelityReport rep;
  rep.threshold = threshold;
  rep.cosine = cosine_similarity(original, reconstructed);
  ParamVector a, b;
  a.values = original;
  b.values = reconstructed;
  const auto sa = split(a, chunk_size);
  const auto sb = split(b, chunk_size);
  for (std::size_t c = 0; c < sa.chunk_count(); ++c) {
    rep.per_chunk_cosines.push_back(cosine_similarity(sa.chunks[c], sb.chunks[c]));
  }
  rep.passed = rep.cosine >= threshold;
  return rep;
}

}  // namespace selfnet
