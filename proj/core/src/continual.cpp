#include "selfnet/continual.hpp"

#include <algorithm>

#include "selfnet/checkpoint.hpp"

namespace selfnet {

namespace {

// checkpoint id for the anchor vector; not a task, so task ids may not use it
constexpr const char* kAnchorItemId = "anchor-source";

}  // namespace

Buffer::Buffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("buffer capacity m must be >= 1");
}

void Buffer::push(ParamVector params) {
  if (full()) throw Error("buffer is full; consolidate before pushing");
  if (params.task_id.empty()) throw InputError("buffer entries need a task id");
  if (find(params.task_id) != nullptr) {
    throw InputError("task '" + params.task_id + "' already buffered");
  }
  BufferEntry e;
  e.task_id = params.task_id;
  e.params = std::move(params);
  entries_.push_back(std::move(e));
}

const ParamVector* Buffer::find(const std::string& task_id) const {
  for (const auto& e : entries_) {
    if (e.task_id == task_id) return &e.params;
  }
  return nullptr;
}

void SelfNetConfig::validate() const {
  if (buffer_capacity == 0) throw ConfigError("buffer capacity m must be >= 1");
  if (latent_dim < 1) throw ConfigError("latent dim d must be >= 1");
  if (hidden_dim < 1) throw ConfigError("hidden dim h must be >= 1");
  if (anchor_lambda < 0.0f) throw ConfigError("anchor lambda must be >= 0");
  if (consolidation.max_epochs < 1) throw ConfigError("consolidation needs max_epochs >= 1");
  if (consolidation.cosine_threshold <= 0.0 || consolidation.cosine_threshold > 1.0) {
    throw ConfigError("cosine threshold must be in (0, 1]");
  }
  if (schedule.epochs < 0 || schedule.batch_size < 1) {
    throw ConfigError("invalid training schedule");
  }
}

SelfNet::SelfNet(SelfNetConfig cfg)
    : cfg_(std::move(cfg)), buffer_(cfg_.buffer_capacity) {
  cfg_.validate();
  chunk_size_ = cfg_.chunk_size;
}

bool SelfNet::knows(const std::string& task_id) const {
  return buffer_.find(task_id) != nullptr || store_.count(task_id) > 0;
}

ArchDescriptor SelfNet::arch_from_dims(const std::vector<std::uint32_t>& dims) const {
  if (dims.size() < 2) {
    throw IntegrityError("stored vector has no architecture dims");
  }
  return make_mlp_arch(std::vector<int>(dims.begin(), dims.end()),
                       cfg_.hidden_activation, Head::softmax_ce);
}

LearnResult SelfNet::learn_task(const TaskSpec& spec, const ArchDescriptor& arch) {
  spec.validate();
  arch.validate();
  if (spec.task_id == kAnchorItemId) {
    throw InputError("task id '" + spec.task_id + "' is reserved");
  }
  if (knows(spec.task_id)) {
    throw InputError("task '" + spec.task_id + "' already learned");
  }
  if (arch.output_head != Head::softmax_ce) {
    throw InputError("task networks use the softmax_ce head");
  }
  for (std::size_t l = 0; l + 1 < arch.activations.size(); ++l) {
    if (arch.activations[l] != cfg_.hidden_activation) {
      throw InputError("task hidden activations must be " +
                       std::string(activation_name(cfg_.hidden_activation)) +
                       " (recollection rebuilds networks from layer dims alone)");
    }
  }
  if (arch.activations.back() != Activation::identity) {
    throw InputError("task networks end in an identity layer under the softmax head");
  }

  TrainSchedule sched = cfg_.schedule;
  sched.seed = derive_seed(cfg_.seed, "task-train", learned_order_.size());

  const ParamVector* init = nullptr;
  AnchorConfig anchor;
  if (anchor_source_ && cfg_.anchor_lambda > 0.0f) {
    if (static_cast<long>(anchor_source_->values.size()) != arch.param_count()) {
      throw InputError("anchored training needs a uniform architecture");
    }
    init = &*anchor_source_;
    anchor.source = anchor_source_->values;
    anchor.lambda = cfg_.anchor_lambda;
  }

  TrainResult trained = train_task(spec, arch, init, anchor, sched);

  LearnResult out;
  out.task_id = spec.task_id;
  out.train_accuracy = trained.train_accuracy;
  out.test_accuracy = evaluate(trained.net, spec).accuracy;

  if (chunk_size_ == 0) chunk_size_ = trained.params.size();
  trained.params.task_id = spec.task_id;
  buffer_.push(std::move(trained.params));
  learned_order_.push_back(spec.task_id);

  if (buffer_.full()) {
    if (cfg_.anchor_lambda > 0.0f && !anchor_source_) {
      // the mean of the first m exact vectors becomes the shared source
      std::vector<ParamVector> firsts;
      for (const auto& e : buffer_.entries()) firsts.push_back(e.params);
      anchor_source_ = mean_params(firsts);
      anchor_source_->task_id = kAnchorItemId;
    }
    out.stage = consolidate_all();
  }
  return out;
}

StageReport SelfNet::consolidate_all() {
  // R: previous-stage reconstructions of every stored task, then the exact
  // buffered vectors, all re-chunked so pads are exact zeros again
  struct Target {
    std::string id;
    ParamVector full;
    SubvectorSet chunks;
  };
  std::vector<Target> targets;
  targets.reserve(learned_order_.size());
  for (const auto& id : learned_order_) {
    Target t;
    t.id = id;
    if (const ParamVector* exact = buffer_.find(id)) {
      t.full = *exact;
    } else {
      t.full = decode_record(store_.at(id));
    }
    t.chunks = split(t.full, chunk_size_);
    targets.push_back(std::move(t));
  }

  std::vector<std::vector<float>> flat;
  for (const auto& t : targets) {
    flat.insert(flat.end(), t.chunks.chunks.begin(), t.chunks.chunks.end());
  }

  if (!cae_) {
    Rng rng(derive_seed(cfg_.seed, "cae-init"));
    cae_ = make_cae<float>(static_cast<int>(chunk_size_), cfg_.hidden_dim,
                           cfg_.latent_dim, cfg_.consolidation.lambda_c, rng);
  }
  ConsolidationConfig ccfg = cfg_.consolidation;
  ccfg.shuffle_seed =
      derive_seed(cfg_.seed, "stage-shuffle", static_cast<std::uint64_t>(stage_));
  ConsolidationResult res = consolidate(*cae_, flat, ccfg);

  StageReport report;
  report.stage = ++stage_;
  report.epochs_used = res.epochs_run;
  report.converged = res.converged;

  std::map<std::string, LatentRecord> new_store;
  std::size_t offset = 0;
  double cosine_sum = 0.0;
  double min_chunk = 1.0;
  for (const auto& t : targets) {
    const std::size_t r = t.chunks.chunk_count();
    LatentRecord rec;
    rec.task_id = t.id;
    rec.codes.assign(res.codes.begin() + static_cast<std::ptrdiff_t>(offset),
                     res.codes.begin() + static_cast<std::ptrdiff_t>(offset + r));
    rec.original_len = t.full.size();
    rec.chunk_size = static_cast<std::uint32_t>(chunk_size_);
    rec.arch_dims = t.full.arch_dims;
    offset += r;

    ParamVector recon = decode_record(rec);
    FidelityReport fr = fidelity_report(t.full.values, recon.values, chunk_size_,
                                        ccfg.cosine_threshold);
    cosine_sum += fr.cosine;
    for (double c : fr.per_chunk_cosines) min_chunk = std::min(min_chunk, c);
    report.task_ids.push_back(t.id);
    report.fidelity.push_back(std::move(fr));
    new_store.emplace(t.id, std::move(rec));
  }

  store_ = std::move(new_store);
  buffer_.clear();

  report.mean_cosine = cosine_sum / static_cast<double>(targets.size());
  report.min_chunk_cosine = min_chunk;
  report.stored_value_count = stored_value_count();
  report.compression_ratio = compression_ratio();
  return report;
}

ParamVector SelfNet::decode_record(const LatentRecord& record) const {
  record.validate();
  if (!cae_) throw IntegrityError("latent record present without an autoencoder");
  const auto r = static_cast<Eigen::Index>(record.code_count());
  const auto d = static_cast<Eigen::Index>(record.latent_dim());
  if (d != cae_->latent_dim()) {
    throw IntegrityError("latent record dim " + std::to_string(d) +
                         " does not match autoencoder dim " +
                         std::to_string(cae_->latent_dim()));
  }
  Matrix<float> codes(r, d);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      codes(i, j) = record.codes[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  Matrix<float> chunks = decode(*cae_, codes);

  SubvectorSet s;
  s.original_len = record.original_len;
  s.pad_len = static_cast<std::size_t>(r) * record.chunk_size - record.original_len;
  s.arch_dims = record.arch_dims;
  s.task_id = record.task_id;
  for (Eigen::Index i = 0; i < r; ++i) {
    s.chunks.emplace_back(chunks.row(i).data(), chunks.row(i).data() + chunks.cols());
  }
  return reassemble(s);
}

ParamVector SelfNet::recollect_params(const std::string& task_id) const {
  if (const ParamVector* exact = buffer_.find(task_id)) return *exact;
  auto it = store_.find(task_id);
  if (it == store_.end()) throw NotFoundError("unknown task: " + task_id);
  return decode_record(it->second);
}

DenseNetwork<float> SelfNet::recollect(const std::string& task_id) const {
  ParamVector params = recollect_params(task_id);
  return unflatten(params, arch_from_dims(params.arch_dims));
}

StageReport SelfNet::stage_metrics(const std::vector<TaskSpec>& specs) const {
  StageReport report;
  report.stage = stage_;
  double sum = 0.0;
  for (const auto& spec : specs) {
    DenseNetwork<float> net = recollect(spec.task_id);
    const double acc = evaluate(net, spec).accuracy;
    report.task_ids.push_back(spec.task_id);
    report.accuracies.push_back(acc);
    sum += acc;
  }
  report.mean_accuracy = specs.empty() ? 0.0 : sum / static_cast<double>(specs.size());
  report.stored_value_count = stored_value_count();
  report.compression_ratio = compression_ratio();
  return report;
}

std::size_t SelfNet::stored_value_count() const {
  std::size_t total = 0;
  for (const auto& [id, rec] : store_) total += rec.code_count() * rec.latent_dim();
  return total;
}

double SelfNet::compression_ratio() const {
  if (learned_order_.empty()) return 0.0;
  std::size_t original = 0;
  std::size_t max_q = 0;
  for (const auto& e : buffer_.entries()) {
    original += e.params.size();
    max_q = std::max(max_q, e.params.size());
  }
  for (const auto& [id, rec] : store_) {
    original += static_cast<std::size_t>(rec.original_len);
    max_q = std::max(max_q, static_cast<std::size_t>(rec.original_len));
  }
  const std::size_t ae = cae_ ? static_cast<std::size_t>(cae_->net.param_count()) : 0;
  const std::size_t denom = ae + stored_value_count() + cfg_.buffer_capacity * max_q;
  return static_cast<double>(original) / static_cast<double>(denom);
}

void SelfNet::save(const std::filesystem::path& path) const {
  std::vector<CheckpointItem> items;
  for (const auto& id : learned_order_) {
    if (const ParamVector* exact = buffer_.find(id)) {
      items.emplace_back(*exact);
    } else {
      items.emplace_back(store_.at(id));
    }
  }
  if (anchor_source_) {
    ParamVector a = *anchor_source_;
    a.task_id = kAnchorItemId;
    items.emplace_back(std::move(a));
  }
  if (cae_) items.emplace_back(*cae_);
  save_checkpoint(path, items);
}

SelfNet SelfNet::load(const std::filesystem::path& path, const SelfNetConfig& cfg) {
  SelfNet self(cfg);
  for (auto& item : load_checkpoint(path)) {
    if (auto* pv = std::get_if<ParamVector>(&item)) {
      if (pv->task_id == kAnchorItemId) {
        self.anchor_source_ = std::move(*pv);
        continue;
      }
      if (self.knows(pv->task_id)) {
        throw IntegrityError("checkpoint repeats task '" + pv->task_id + "'");
      }
      if (self.buffer_.full()) {
        throw IntegrityError("checkpoint buffers more tasks than capacity m");
      }
      self.learned_order_.push_back(pv->task_id);
      self.buffer_.push(std::move(*pv));
    } else if (auto* rec = std::get_if<LatentRecord>(&item)) {
      if (self.knows(rec->task_id)) {
        throw IntegrityError("checkpoint repeats task '" + rec->task_id + "'");
      }
      if (self.chunk_size_ == 0) self.chunk_size_ = rec->chunk_size;
      if (rec->chunk_size != self.chunk_size_) {
        throw IntegrityError("checkpoint mixes chunk sizes");
      }
      self.learned_order_.push_back(rec->task_id);
      self.store_.emplace(rec->task_id, std::move(*rec));
    } else {
      self.cae_ = std::move(std::get<CaeModel>(item));
    }
  }
  if (!self.store_.empty()) {
    if (!self.cae_) throw IntegrityError("latent records without an autoencoder");
    if (self.cae_->input_dim() != static_cast<int>(self.chunk_size_)) {
      throw IntegrityError("autoencoder input dim does not match chunk size");
    }
    // each stage consolidates the m buffered tasks into the store
    self.stage_ = static_cast<int>((self.store_.size() + cfg.buffer_capacity - 1) /
                                   cfg.buffer_capacity);
  }
  return self;
}

}  // namespace selfnet
