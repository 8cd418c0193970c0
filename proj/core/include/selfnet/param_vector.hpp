#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "selfnet/network.hpp"

namespace selfnet {

// A network's parameters as one flat vector of length q. Ordering is frozen:
// for each layer in order, weight matrix row-major, then bias. Checkpoints
// depend on this ordering, so it must never change.
struct ParamVector {
  std::vector<float> values;
  std::vector<std::uint32_t> arch_dims;  // layer dims of the source net; empty for raw vectors
  std::string task_id;

  std::size_t size() const { return values.size(); }
};

ParamVector flatten(const DenseNetwork<float>& net);

// Inverse of flatten. Throws ShapeError naming expected/actual lengths.
DenseNetwork<float> unflatten(const ParamVector& v, const ArchDescriptor& arch);

// cos(a,b) = a.b / (|a||b|), accumulated in double. Throws ShapeError on
// length mismatch and NumericError when either vector has zero norm.
double cosine_similarity(const float* a, const float* b, std::size_t len);
double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b);

// q-length vector cut into r = ceil(q/n) chunks of length n; the last chunk
// is zero-padded. Carries source metadata through so reassemble is a full
// inverse of split.
struct SubvectorSet {
  std::vector<std::vector<float>> chunks;
  std::size_t original_len = 0;  // q
  std::size_t pad_len = 0;       // r*n - q
  std::vector<std::uint32_t> arch_dims;
  std::string task_id;

  std::size_t chunk_count() const { return chunks.size(); }
  std::size_t chunk_size() const { return chunks.empty() ? 0 : chunks.front().size(); }
};

SubvectorSet split(const ParamVector& v, std::size_t chunk_size);

// Concatenates chunks and truncates to original_len (pad values are ignored).
// Throws IntegrityError when the bookkeeping is inconsistent.
ParamVector reassemble(const SubvectorSet& s);

// Reconstruction fidelity of one network. `cosine` is computed on the
// unpadded q-length vectors (padding would inflate it); per-chunk cosines are
// over full n-length chunks, matching what the consolidation gate sees.
struct FidelityReport {
  double cosine = 0.0;
  std::vector<double> per_chunk_cosines;
  double threshold = 0.0;
  bool passed = false;
};

FidelityReport fidelity_report(const std::vector<float>& original,
                               const std::vector<float>& reconstructed,
                               std::size_t chunk_size, double threshold);

}  // namespace selfnet
