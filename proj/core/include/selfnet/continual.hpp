#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selfnet/cae.hpp"
#include "selfnet/task_trainer.hpp"

namespace selfnet {

struct BufferEntry {
  std::string task_id;
  ParamVector params;
};

// Short-term memory: the latest learned weight vectors, stored exactly.
class Buffer {
 public:
  explicit Buffer(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool full() const { return entries_.size() == capacity_; }

  // FIFO append; the entry id comes from params.task_id
  void push(ParamVector params);
  const ParamVector* find(const std::string& task_id) const;
  const std::deque<BufferEntry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

 private:
  std::size_t capacity_;
  std::deque<BufferEntry> entries_;
};

struct SelfNetConfig {
  std::size_t buffer_capacity = 5;  // m
  std::size_t chunk_size = 0;       // n; 0 = first task's q (no chunking)
  int latent_dim = 5;               // d
  int hidden_dim = 32;              // h
  float anchor_lambda = 0.0f;       // > 0 turns on mean-anchored fine-tuning
  Activation hidden_activation = Activation::relu;  // all task networks agree
  std::uint64_t seed = 0;
  TrainSchedule schedule;
  ConsolidationConfig consolidation;

  void validate() const;
};

// What one consolidation stage (or metrics snapshot) looked like.
struct StageReport {
  int stage = 0;
  std::vector<std::string> task_ids;
  std::vector<FidelityReport> fidelity;  // per task; filled by consolidation
  std::vector<double> accuracies;        // per task; filled by stage_metrics
  double mean_cosine = 0.0;
  double min_chunk_cosine = 0.0;
  double mean_accuracy = 0.0;
  int epochs_used = 0;
  bool converged = true;
  double compression_ratio = 0.0;
  std::size_t stored_value_count = 0;  // latent floats across all records
};

struct LearnResult {
  std::string task_id;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::optional<StageReport> stage;  // set when this task filled the buffer
};

// The continual learner: trains per-task networks, buffers their exact
// weights, and consolidates buffered + previously stored networks into the
// autoencoder whenever the buffer fills. Recollection serves buffered tasks
// exactly and consolidated tasks via decode + reassemble.
class SelfNet {
 public:
  explicit SelfNet(SelfNetConfig cfg);

  LearnResult learn_task(const TaskSpec& spec, const ArchDescriptor& arch);

  DenseNetwork<float> recollect(const std::string& task_id) const;
  ParamVector recollect_params(const std::string& task_id) const;

  // evaluates every recollected network on its own test set
  StageReport stage_metrics(const std::vector<TaskSpec>& specs) const;

  bool knows(const std::string& task_id) const;
  std::size_t task_count() const { return learned_order_.size(); }
  const std::vector<std::string>& learned_order() const { return learned_order_; }
  const Buffer& buffer() const { return buffer_; }
  const std::map<std::string, LatentRecord>& latent_store() const { return store_; }
  const std::optional<CaeModel>& cae() const { return cae_; }
  const std::optional<ParamVector>& anchor_source() const { return anchor_source_; }
  int stage() const { return stage_; }
  std::size_t chunk_size() const { return chunk_size_; }

  // total original params / (AE params + stored latent floats + buffer slots)
  double compression_ratio() const;
  std::size_t stored_value_count() const;

  void save(const std::filesystem::path& path) const;
  static SelfNet load(const std::filesystem::path& path, const SelfNetConfig& cfg);

 private:
  StageReport consolidate_all();
  ParamVector decode_record(const LatentRecord& record) const;
  ArchDescriptor arch_from_dims(const std::vector<std::uint32_t>& dims) const;

  SelfNetConfig cfg_;
  Buffer buffer_;
  std::map<std::string, LatentRecord> store_;
  std::optional<CaeModel> cae_;
  std::optional<ParamVector> anchor_source_;
  std::vector<std::string> learned_order_;
  std::size_t chunk_size_ = 0;
  int stage_ = 0;
};

}  // namespace selfnet
