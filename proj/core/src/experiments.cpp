#include "selfnet/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "selfnet/continual.hpp"

#ifndef SELFNET_BUILD_ID
#define SELFNET_BUILD_ID "unknown"
#endif

namespace selfnet {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// soft wall-clock guard: warns once, never truncates
class BudgetTimer {
 public:
  BudgetTimer(double budget_s, std::vector<std::string>& warnings)
      : start_(Clock::now()), budget_s_(budget_s), warnings_(warnings) {}

  void check(const std::string& where) {
    if (tripped_ || budget_s_ <= 0.0) return;
    const double elapsed = seconds_since(start_);
    if (elapsed > budget_s_) {
      tripped_ = true;
      warnings_.push_back("soft time budget exceeded at " + where + " (" +
                          format_metric(elapsed) + "s > " + format_metric(budget_s_) +
                          "s); continuing");
    }
  }

  bool tripped() const { return tripped_; }
  double elapsed() const { return seconds_since(start_); }

 private:
  Clock::time_point start_;
  double budget_s_;
  std::vector<std::string>& warnings_;
  bool tripped_ = false;
};

double resolved_budget(const ExperimentConfig& cfg, ExperimentKind kind) {
  return cfg.time_budget_s > 0.0 ? cfg.time_budget_s : default_time_budget_s(kind);
}

bool idx_base_available(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  return fs::exists(dir / "train-images-idx3-ubyte") &&
         fs::exists(dir / "train-labels-idx1-ubyte") &&
         fs::exists(dir / "t10k-images-idx3-ubyte") &&
         fs::exists(dir / "t10k-labels-idx1-ubyte");
}

// synthetic stand-ins sized so every split/permuted draw has enough samples
void synthetic_base(const TaskStreamSpec& spec, std::uint64_t stream_seed,
                    Dataset& train, Dataset& test) {
  int classes = spec.synthetic_classes;
  if (spec.kind == StreamKind::split_mnist) classes = std::max(classes, 10);

  std::size_t per_class_train = spec.train_n;
  std::size_t per_class_test = spec.test_n;
  if (spec.kind == StreamKind::split_mnist) {
    const auto pos_train =
        static_cast<std::size_t>(std::lround(spec.split_mix * double(spec.train_n)));
    const auto neg_train = spec.train_n - pos_train;
    per_class_train = std::max(pos_train, (neg_train + 3) / 4);
    const auto pos_test =
        static_cast<std::size_t>(std::lround(spec.split_mix * double(spec.test_n)));
    const auto neg_test = spec.test_n - pos_test;
    per_class_test = std::max(pos_test, (neg_test + 3) / 4);
  }
  // 50% headroom over the per-class need, covering round-robin remainders
  const std::size_t train_total = classes * (per_class_train * 3 / 2 + 1);
  const std::size_t test_total = classes * (per_class_test * 3 / 2 + 1);

  TaskSpec base = make_synthetic_task(derive_seed(stream_seed, "base"),
                                      spec.synthetic_dims, classes,
                                      spec.synthetic_spread, train_total, test_total);
  train = std::move(base.train);
  test = std::move(base.test);
}

MetricsRow base_row(std::string method, int stage, std::string task_id) {
  MetricsRow r;
  r.method = std::move(method);
  r.stage = stage;
  r.task_id = std::move(task_id);
  return r;
}

struct ArmSpec {
  PenaltyKind kind;
  float lambda_b;
};

ArmSpec baseline_arm(const std::string& method, const BaselineParams& p) {
  if (method == "sgd") return {PenaltyKind::none, 0.0f};
  if (method == "l2") return {PenaltyKind::l2_all, p.l2_all};
  if (method == "l2_online") return {PenaltyKind::l2_online, p.l2_online};
  if (method == "ewc") return {PenaltyKind::ewc, p.ewc};
  if (method == "ewc_online") return {PenaltyKind::ewc_online, p.ewc_online};
  throw ConfigError("unknown baseline method '" + method + "'");
}

// decodes one task's chunk rows back into a parameter vector
ParamVector decode_codes(const CaeModel& cae, const std::vector<std::vector<float>>& codes,
                         std::size_t original_len, std::size_t chunk_size,
                         const std::vector<std::uint32_t>& arch_dims,
                         const std::string& task_id) {
  const auto r = static_cast<Eigen::Index>(codes.size());
  const auto d = static_cast<Eigen::Index>(codes.front().size());
  Matrix<float> mat(r, d);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      mat(i, j) = codes[std::size_t(i)][std::size_t(j)];
    }
  }
  Matrix<float> chunks = decode(cae, mat);

  SubvectorSet s;
  s.original_len = original_len;
  s.pad_len = std::size_t(r) * chunk_size - original_len;
  s.arch_dims = arch_dims;
  s.task_id = task_id;
  for (Eigen::Index i = 0; i < r; ++i) {
    s.chunks.emplace_back(chunks.row(i).data(), chunks.row(i).data() + chunks.cols());
  }
  return reassemble(s);
}

// Reproduces the exact task-network vectors a SelfNet learner trains for this
// run seed: plain for the first m tasks, then mean-anchored when configured.
std::vector<ParamVector> reproduce_task_vectors(const ExperimentConfig& cfg,
                                                const StreamBundle& bundle,
                                                const ArchDescriptor& arch,
                                                std::uint64_t seed) {
  std::vector<ParamVector> out;
  std::optional<ParamVector> anchor_source;
  const std::size_t m = cfg.selfnet.buffer_capacity;
  for (std::size_t t = 0; t < bundle.tasks.size(); ++t) {
    TrainSchedule sched = cfg.schedule;
    sched.seed = derive_seed(seed, "task-train", t);

    const ParamVector* init = nullptr;
    AnchorConfig anchor;
    if (anchor_source && cfg.selfnet.anchor_lambda > 0.0f) {
      init = &*anchor_source;
      anchor.source = anchor_source->values;
      anchor.lambda = cfg.selfnet.anchor_lambda;
    }
    TrainResult trained = train_task(bundle.tasks[t], arch, init, anchor, sched);
    trained.params.task_id = bundle.tasks[t].task_id;
    out.push_back(std::move(trained.params));

    if (out.size() == m && cfg.selfnet.anchor_lambda > 0.0f && !anchor_source) {
      std::vector<ParamVector> firsts(out.begin(), out.begin() + long(m));
      anchor_source = mean_params(firsts);
    }
  }
  return out;
}

}  // namespace

std::string build_id() { return SELFNET_BUILD_ID; }

std::string make_run_id(ExperimentKind kind, std::uint64_t seed) {
  return std::string(experiment_kind_name(kind)) + "-" + std::to_string(seed);
}

StreamBundle build_stream(const TaskStreamSpec& spec, std::uint64_t run_seed,
                          std::vector<std::string>& warnings) {
  TaskStreamSpec derived = spec;
  derived.seed = derive_seed(run_seed, "stream");

  StreamBundle bundle;
  Dataset train_base;
  Dataset test_base;
  const Dataset* train_ptr = nullptr;
  const Dataset* test_ptr = nullptr;

  if (spec.kind != StreamKind::synthetic) {
    const char* dir = std::getenv("SELFNET_DATA_DIR");
    if (dir != nullptr && idx_base_available(dir)) {
      const std::filesystem::path root(dir);
      train_base = load_mnist_idx(root / "train-images-idx3-ubyte",
                                  root / "train-labels-idx1-ubyte");
      test_base = load_mnist_idx(root / "t10k-images-idx3-ubyte",
                                 root / "t10k-labels-idx1-ubyte");
      bundle.base_source = "mnist";
    } else {
      if (dir != nullptr) {
        warnings.push_back("SELFNET_DATA_DIR is set but lacks the four IDX files; "
                           "falling back to the synthetic base");
      }
      synthetic_base(derived, derived.seed, train_base, test_base);
      bundle.base_source = "synthetic";
    }
    train_ptr = &train_base;
    test_ptr = &test_base;
  } else {
    bundle.base_source = "synthetic";
  }

  bundle.tasks = generate_stream(derived, train_ptr, test_ptr);
  for (const auto& t : bundle.tasks) {
    bundle.task_tuples.push_back(t.task_id + ": " + t.composition);
  }
  bundle.input_dims = static_cast<int>(bundle.tasks.front().train.dim());
  bundle.class_count = bundle.tasks.front().class_count;
  return bundle;
}

ArchDescriptor task_arch(const StreamBundle& bundle, int hidden, Activation activation) {
  return make_mlp_arch({bundle.input_dims, hidden, bundle.class_count}, activation,
                       Head::softmax_ce);
}

RobustnessSummary run_robustness(const ExperimentConfig& cfg, const StreamBundle& bundle,
                                 std::uint64_t seed, MetricsTable& table,
                                 std::vector<std::string>& warnings) {
  BudgetTimer budget(resolved_budget(cfg, ExperimentKind::robustness), warnings);
  const TaskSpec& spec = bundle.tasks.front();
  const ArchDescriptor arch =
      task_arch(bundle, cfg.tn_hidden, cfg.selfnet.hidden_activation);

  TrainSchedule sched = cfg.schedule;
  sched.seed = derive_seed(seed, "task-train", 0);
  const TrainResult trained = train_task(spec, arch, nullptr, {}, sched);
  const ParamVector& theta = trained.params;
  const std::size_t q = theta.size();

  RobustnessSummary summary;
  summary.original_accuracy = evaluate(trained.net, spec).accuracy;

  int variant_no = 0;
  auto record = [&](const std::string& arm, double cosine, double accuracy) {
    summary.variants.push_back({arm, cosine, accuracy});
    MetricsRow row = base_row(arm, variant_no++, spec.task_id);
    row.cosine = cosine;
    row.accuracy = accuracy;
    table.add(row);
  };

  // zero-noise identity first
  record("noise", cosine_similarity(theta.values, theta.values),
         summary.original_accuracy);

  double norm_sq = 0.0;
  for (float v : theta.values) norm_sq += double(v) * v;
  const double norm = std::sqrt(norm_sq);

  // noise magnitudes aimed at cosines from just-below-1 down to 0.97
  for (int level = 1; level < cfg.noise_levels; ++level) {
    const double target =
        1.0 - (1.0 - 0.97) * double(level) / double(cfg.noise_levels - 1);
    const double sigma =
        norm / std::sqrt(double(q)) * std::sqrt(1.0 / (target * target) - 1.0);
    for (int v = 0; v < cfg.noise_variants; ++v) {
      Rng rng(derive_seed(seed, "noise-variant",
                          std::uint64_t(level) * 1000 + std::uint64_t(v)));
      ParamVector variant = theta;
      for (auto& x : variant.values) {
        x += static_cast<float>(sigma * rng.normal());
      }
      const double cosine = cosine_similarity(theta.values, variant.values);
      const double acc = evaluate(unflatten(variant, arch), spec).accuracy;
      record("noise", cosine, acc);
    }
    budget.check("noise level " + std::to_string(level));
  }

  // autoencoder reconstructions at increasing training cut-offs
  Rng cae_rng(derive_seed(seed, "cae-init"));
  CaeModel cae = make_cae<float>(static_cast<int>(q), cfg.selfnet.hidden_dim,
                                 cfg.selfnet.latent_dim,
                                 cfg.selfnet.consolidation.lambda_c, cae_rng);
  const std::vector<std::vector<float>> targets = {theta.values};
  int epochs_done = 0;
  for (std::size_t j = 0; j < cfg.cae_cutoffs.size(); ++j) {
    ConsolidationConfig ccfg = cfg.selfnet.consolidation;
    ccfg.cosine_threshold = 1.0;  // run the full slice, no early stop
    ccfg.max_epochs = cfg.cae_cutoffs[j] - epochs_done;
    ccfg.shuffle_seed = derive_seed(seed, "cae-cutoff", j);
    const ConsolidationResult res = consolidate(cae, targets, ccfg);
    epochs_done = cfg.cae_cutoffs[j];

    const ParamVector recon = decode_codes(cae, res.codes, q, q, theta.arch_dims,
                                           theta.task_id);
    const double cosine = cosine_similarity(theta.values, recon.values);
    const double acc = evaluate(unflatten(recon, arch), spec).accuracy;
    record("cae", cosine, acc);
    budget.check("cae cutoff " + std::to_string(cfg.cae_cutoffs[j]));
  }

  return summary;
}

RobustnessChecks robustness_checks(const RobustnessSummary& s, double cosine_threshold,
                                   double tolerance_points, int bins,
                                   double inversion_slack_points) {
  RobustnessChecks checks;
  if (s.variants.empty()) return checks;

  const auto& zero = s.variants.front();
  checks.zero_noise_identity =
      zero.cosine >= 1.0 - 1e-9 && zero.accuracy == s.original_accuracy;

  std::size_t within = 0;
  for (const auto& v : s.variants) {
    if (v.cosine >= cosine_threshold) {
      ++checks.high_cosine_count;
      if ((s.original_accuracy - v.accuracy) * 100.0 <= tolerance_points) ++within;
    }
  }
  checks.fraction_within =
      checks.high_cosine_count == 0
          ? 0.0
          : double(within) / double(checks.high_cosine_count);

  // binned accuracy over [0.97, 1.0], non-decreasing up to one small inversion
  std::vector<double> sum(std::size_t(bins), 0.0);
  std::vector<std::size_t> count(std::size_t(bins), 0);
  for (const auto& v : s.variants) {
    if (v.cosine < 0.97) continue;  // out of the studied range
    int b = int((v.cosine - 0.97) / (1.0 - 0.97) * bins);
    b = std::clamp(b, 0, bins - 1);
    sum[std::size_t(b)] += v.accuracy;
    ++count[std::size_t(b)];
  }
  double prev = -1.0;
  for (int b = 0; b < bins; ++b) {
    if (count[std::size_t(b)] == 0) continue;
    const double mean = sum[std::size_t(b)] / double(count[std::size_t(b)]);
    if (prev >= 0.0 && mean < prev) {
      ++checks.inversions;
      checks.worst_inversion_points =
          std::max(checks.worst_inversion_points, (prev - mean) * 100.0);
    }
    prev = std::max(prev, mean);
  }
  checks.monotone_ok = checks.inversions <= 1 &&
                       checks.worst_inversion_points <= inversion_slack_points;
  return checks;
}

ClCompareSummary run_cl_compare(const ExperimentConfig& cfg, const StreamBundle& bundle,
                                std::uint64_t seed, MetricsTable& table,
                                std::vector<std::string>& warnings,
                                const std::filesystem::path* state_out) {
  BudgetTimer budget(resolved_budget(cfg, ExperimentKind::cl_compare), warnings);
  const auto& tasks = bundle.tasks;
  const std::size_t k = tasks.size();
  const ArchDescriptor arch =
      task_arch(bundle, cfg.tn_hidden, cfg.selfnet.hidden_activation);

  ClCompareSummary summary;
  auto push_stage_mean = [&](const std::string& method, std::size_t stage_1based,
                             double mean) {
    auto& v = summary.stage_mean[method];
    v.resize(std::max(v.size(), stage_1based));
    v[stage_1based - 1] = mean;
  };

  for (const auto& method : cfg.methods) {
    try {
      if (method == "independent") {
        std::vector<double> accs;
        for (std::size_t t = 0; t < k; ++t) {
          TrainSchedule sched = cfg.schedule;
          sched.seed = derive_seed(seed, "task-train", t);
          const TrainResult trained = train_task(tasks[t], arch, nullptr, {}, sched);
          accs.push_back(evaluate(trained.net, tasks[t]).accuracy);
          budget.check("independent task " + std::to_string(t + 1));
        }
        for (std::size_t s = 0; s < k; ++s) {
          double sum = 0.0;
          for (std::size_t t = 0; t <= s; ++t) {
            MetricsRow row = base_row("independent", int(s + 1), tasks[t].task_id);
            row.accuracy = accs[t];  // frozen nets: the curve is flat
            table.add(row);
            sum += accs[t];
          }
          push_stage_mean("independent", s + 1, sum / double(s + 1));
        }
      } else if (method == "selfnet") {
        SelfNetConfig sn = cfg.selfnet;
        sn.seed = seed;
        sn.schedule = cfg.schedule;
        SelfNet learner(sn);
        for (std::size_t t = 0; t < k; ++t) {
          const LearnResult res = learner.learn_task(tasks[t], arch);
          const std::vector<TaskSpec> seen(tasks.begin(), tasks.begin() + long(t) + 1);
          const StageReport metrics = learner.stage_metrics(seen);

          double sum = 0.0;
          for (std::size_t i = 0; i <= t; ++i) {
            MetricsRow row = base_row("selfnet", int(t + 1), tasks[i].task_id);
            row.accuracy = metrics.accuracies[i];
            if (res.stage) {
              row.cosine = res.stage->fidelity[i].cosine;
              row.consolidation_epochs = res.stage->epochs_used;
              row.compression_ratio = res.stage->compression_ratio;
            }
            table.add(row);
            sum += metrics.accuracies[i];
          }
          push_stage_mean("selfnet", t + 1, sum / double(t + 1));
          if (res.stage && !res.stage->converged) {
            warnings.push_back("selfnet stage " + std::to_string(res.stage->stage) +
                               ": consolidation stopped below threshold (mean cosine " +
                               format_metric(res.stage->mean_cosine) + ")");
          }
          budget.check("selfnet task " + std::to_string(t + 1));
        }
        if (state_out != nullptr) learner.save(*state_out);
      } else {
        const ArmSpec arm = baseline_arm(method, cfg.baselines);
        TrainSchedule sched = cfg.schedule;
        sched.seed = derive_seed(seed, "arm-" + method);
        const BaselineRunResult run =
            train_sequential(arm.kind, arm.lambda_b, tasks, arch, sched,
                             cfg.baselines.fisher_samples, cfg.baselines.gamma);
        for (std::size_t s = 0; s < run.accuracy.size(); ++s) {
          double sum = 0.0;
          for (std::size_t t = 0; t < run.accuracy[s].size(); ++t) {
            MetricsRow row = base_row(method, int(s + 1), tasks[t].task_id);
            row.accuracy = run.accuracy[s][t];
            table.add(row);
            sum += run.accuracy[s][t];
          }
          push_stage_mean(method, s + 1, sum / double(run.accuracy[s].size()));
        }
        budget.check("method " + method);
      }
    } catch (const std::exception& e) {
      // arms are isolated: record the failure, keep the others
      summary.failures[method] = e.what();
      warnings.push_back("method " + method + " failed: " + e.what());
    }
  }
  return summary;
}

CompressionSummary run_compression(const ExperimentConfig& cfg, const StreamBundle& bundle,
                                   std::uint64_t seed, MetricsTable& table,
                                   std::vector<std::string>& warnings,
                                   const std::filesystem::path* state_out) {
  BudgetTimer budget(resolved_budget(cfg, ExperimentKind::compression), warnings);
  const auto& tasks = bundle.tasks;
  const ArchDescriptor arch =
      task_arch(bundle, cfg.tn_hidden, cfg.selfnet.hidden_activation);

  CompressionSummary summary;

  SelfNetConfig sn = cfg.selfnet;
  sn.seed = seed;
  sn.schedule = cfg.schedule;
  SelfNet learner(sn);

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const LearnResult res = learner.learn_task(tasks[t], arch);
    MetricsRow original = base_row("tn_original", 0, tasks[t].task_id);
    original.accuracy = res.test_accuracy;
    table.add(original);

    if (res.stage) {
      const StageReport& rep = *res.stage;
      const std::vector<TaskSpec> seen(tasks.begin(), tasks.begin() + long(t) + 1);
      const StageReport metrics = learner.stage_metrics(seen);
      double sum = 0.0;
      for (std::size_t i = 0; i <= t; ++i) {
        MetricsRow row = base_row("selfnet", rep.stage, tasks[i].task_id);
        row.accuracy = metrics.accuracies[i];
        row.cosine = rep.fidelity[i].cosine;
        row.consolidation_epochs = rep.epochs_used;
        row.compression_ratio = rep.compression_ratio;
        table.add(row);
        sum += metrics.accuracies[i];
      }
      summary.stage_epochs.push_back(rep.epochs_used);
      summary.stage_mean_accuracy.push_back(sum / double(t + 1));
      summary.stage_ratio.push_back(rep.compression_ratio);
      if (!rep.converged) {
        warnings.push_back("stage " + std::to_string(rep.stage) +
                           ": consolidation stopped below threshold (mean cosine " +
                           format_metric(rep.mean_cosine) + ")");
      }
      budget.check("stage " + std::to_string(rep.stage));
    }
  }

  const StageReport final_report = learner.stage_metrics(tasks);
  summary.final_mean_accuracy = final_report.mean_accuracy;
  summary.final_ratio = learner.compression_ratio();
  if (state_out != nullptr) learner.save(*state_out);

  // control: batch-encode the same exact vectors in one consolidation
  {
    const std::vector<ParamVector> vectors =
        reproduce_task_vectors(cfg, bundle, arch, seed);
    const std::size_t n = learner.chunk_size();

    std::vector<std::vector<float>> flat;
    std::vector<SubvectorSet> splits;
    for (const auto& v : vectors) {
      SubvectorSet s = split(v, n);
      flat.insert(flat.end(), s.chunks.begin(), s.chunks.end());
      splits.push_back(std::move(s));
    }

    Rng cae_rng(derive_seed(seed, "cae-init"));
    CaeModel control = make_cae<float>(static_cast<int>(n), cfg.selfnet.hidden_dim,
                                       cfg.selfnet.latent_dim,
                                       cfg.selfnet.consolidation.lambda_c, cae_rng);
    ConsolidationConfig ccfg = cfg.selfnet.consolidation;
    ccfg.shuffle_seed = derive_seed(seed, "single-batch-shuffle");
    const ConsolidationResult res = consolidate(control, flat, ccfg);
    if (!res.converged) {
      warnings.push_back("single-batch control stopped below threshold (mean cosine " +
                         format_metric(res.mean_cosine) + ")");
    }

    const int final_stage = learner.stage();
    std::size_t offset = 0;
    double sum = 0.0;
    for (std::size_t t = 0; t < vectors.size(); ++t) {
      const std::size_t r = splits[t].chunk_count();
      const std::vector<std::vector<float>> codes(
          res.codes.begin() + long(offset), res.codes.begin() + long(offset + r));
      offset += r;
      const ParamVector recon = decode_codes(control, codes, vectors[t].size(), n,
                                             vectors[t].arch_dims, vectors[t].task_id);
      const double cosine = cosine_similarity(vectors[t].values, recon.values);
      const double acc = evaluate(unflatten(recon, arch), tasks[t]).accuracy;
      sum += acc;

      MetricsRow row = base_row("single_batch", final_stage, tasks[t].task_id);
      row.accuracy = acc;
      row.cosine = cosine;
      row.consolidation_epochs = res.epochs_run;
      table.add(row);
    }
    summary.single_batch_mean_accuracy = sum / double(vectors.size());
    budget.check("single-batch control");
  }

  return summary;
}

MixedArchSummary run_mixed_arch(const ExperimentConfig& cfg, const StreamBundle& bundle,
                                std::uint64_t seed, MetricsTable& table,
                                std::vector<std::string>& warnings) {
  BudgetTimer budget(resolved_budget(cfg, ExperimentKind::mixed_arch), warnings);
  const std::size_t small_count = std::size_t(cfg.mixed_small_count);
  if (bundle.tasks.size() < small_count + 1) {
    throw ConfigError("mixed_arch needs stream.tasks >= mixed.small_count + 1");
  }
  if (cfg.selfnet.anchor_lambda > 0.0f) {
    throw ConfigError("mixed_arch requires selfnet.anchor_lambda = 0 "
                      "(anchoring assumes one architecture)");
  }
  const std::vector<TaskSpec> tasks(bundle.tasks.begin(),
                                    bundle.tasks.begin() + long(small_count) + 1);
  const ArchDescriptor small =
      task_arch(bundle, cfg.tn_hidden, cfg.selfnet.hidden_activation);
  const ArchDescriptor large =
      task_arch(bundle, cfg.mixed_large_hidden, cfg.selfnet.hidden_activation);

  SelfNetConfig sn = cfg.selfnet;
  sn.seed = seed;
  sn.schedule = cfg.schedule;
  sn.buffer_capacity = small_count + 1;  // one consolidation over all of them
  sn.chunk_size = std::size_t(small.param_count());
  SelfNet learner(sn);

  MixedArchSummary summary;
  std::optional<StageReport> stage;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const bool is_large = t == tasks.size() - 1;
    const LearnResult res = learner.learn_task(tasks[t], is_large ? large : small);
    summary.task_ids.push_back(tasks[t].task_id);
    summary.original_accuracy.push_back(res.test_accuracy);

    MetricsRow original = base_row("tn_original", 0, tasks[t].task_id);
    original.accuracy = res.test_accuracy;
    table.add(original);
    if (res.stage) stage = res.stage;
    budget.check("task " + std::to_string(t + 1));
  }
  if (!stage) throw IntegrityError("mixed_arch: consolidation never triggered");

  const StageReport metrics = learner.stage_metrics(tasks);
  summary.min_chunk_cosine = stage->min_chunk_cosine;
  summary.all_chunks_pass = true;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    summary.recollected_accuracy.push_back(metrics.accuracies[i]);
    summary.task_cosine.push_back(stage->fidelity[i].cosine);
    for (double c : stage->fidelity[i].per_chunk_cosines) {
      if (c < cfg.selfnet.consolidation.cosine_threshold) summary.all_chunks_pass = false;
    }
    MetricsRow row = base_row("selfnet", stage->stage, tasks[i].task_id);
    row.accuracy = metrics.accuracies[i];
    row.cosine = stage->fidelity[i].cosine;
    row.consolidation_epochs = stage->epochs_used;
    row.compression_ratio = stage->compression_ratio;
    table.add(row);
  }
  summary.large_chunk_count = stage->fidelity.back().per_chunk_cosines.size();
  if (!stage->converged) {
    warnings.push_back("mixed_arch consolidation stopped below threshold (mean cosine " +
                       format_metric(stage->mean_cosine) + ")");
  }

  // split-AE efficiency: r chunks of size n vs one autoencoder of input r*n,
  // on the same weight vector (direction-only comparison)
  {
    const int triple_hidden = cfg.tn_hidden * 3;
    const ArchDescriptor triple =
        task_arch(bundle, triple_hidden, cfg.selfnet.hidden_activation);
    TrainSchedule sched = cfg.schedule;
    sched.seed = derive_seed(seed, "efficiency-net");
    const TrainResult trained = train_task(tasks[0], triple, nullptr, {}, sched);
    const std::size_t n = std::size_t(small.param_count());

    auto timed_arm = [&](const char* name, std::size_t input_dim,
                         std::uint64_t init_tag_index) {
      Rng rng(derive_seed(seed, "efficiency-init", init_tag_index));
      CaeModel cae = make_cae<float>(static_cast<int>(input_dim), cfg.selfnet.hidden_dim,
                                     cfg.selfnet.latent_dim,
                                     cfg.selfnet.consolidation.lambda_c, rng);
      const SubvectorSet s = split(trained.params, input_dim);
      ConsolidationConfig ccfg = cfg.selfnet.consolidation;
      ccfg.shuffle_seed = derive_seed(seed, "efficiency-shuffle", init_tag_index);
      const auto t0 = Clock::now();
      const ConsolidationResult res = consolidate(cae, s.chunks, ccfg);
      const double elapsed = seconds_since(t0);

      MetricsRow row = base_row(name, 0, trained.params.task_id);
      row.cosine = res.mean_cosine;
      row.consolidation_epochs = res.epochs_run;
      row.wall_time_s = elapsed;
      table.add(row);
      return elapsed;
    };
    summary.split_seconds = timed_arm("split_ae", n, 0);
    summary.fused_seconds = timed_arm("fused_ae", 3 * n, 1);
    budget.check("split-AE efficiency");
  }

  return summary;
}

namespace {

// presence of the lock means another process owns this run directory
class RunLock {
 public:
  explicit RunLock(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
      throw IntegrityError("run directory is locked (" + path_.string() +
                           " exists); is another run active?");
    }
    std::ofstream out(path_);
    if (!out) throw IntegrityError("cannot create lock file " + path_.string());
    out << "pid unknown; remove if no run is active\n";
  }
  ~RunLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

 private:
  std::filesystem::path path_;
};

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg, ExperimentKind kind,
                          std::uint64_t seed, const std::filesystem::path& out_root,
                          const std::string& config_text) {
  const auto t0 = Clock::now();
  RunOutcome outcome;
  outcome.paths.run_dir = out_root / make_run_id(kind, seed);
  std::filesystem::create_directories(outcome.paths.run_dir);
  RunLock lock(outcome.paths.run_dir / "lock");

  outcome.paths.config_copy = outcome.paths.run_dir / "config.cfg";
  outcome.paths.manifest = outcome.paths.run_dir / "manifest.json";
  outcome.paths.csv = outcome.paths.run_dir / "metrics.csv";
  {
    std::ofstream out(outcome.paths.config_copy, std::ios::binary);
    if (!out) {
      throw IntegrityError("cannot write " + outcome.paths.config_copy.string());
    }
    out << config_text;
  }

  StreamBundle bundle = build_stream(cfg.stream, seed, outcome.warnings);

  switch (kind) {
    case ExperimentKind::robustness:
      outcome.robustness =
          run_robustness(cfg, bundle, seed, outcome.metrics, outcome.warnings);
      break;
    case ExperimentKind::cl_compare: {
      const bool with_state =
          std::find(cfg.methods.begin(), cfg.methods.end(), "selfnet") !=
          cfg.methods.end();
      if (with_state) outcome.paths.state = outcome.paths.run_dir / "state.ckpt";
      outcome.cl_compare =
          run_cl_compare(cfg, bundle, seed, outcome.metrics, outcome.warnings,
                         with_state ? &outcome.paths.state : nullptr);
      break;
    }
    case ExperimentKind::compression:
      outcome.paths.state = outcome.paths.run_dir / "state.ckpt";
      outcome.compression = run_compression(cfg, bundle, seed, outcome.metrics,
                                            outcome.warnings, &outcome.paths.state);
      break;
    case ExperimentKind::mixed_arch:
      outcome.mixed_arch =
          run_mixed_arch(cfg, bundle, seed, outcome.metrics, outcome.warnings);
      break;
  }

  const std::string run_id = make_run_id(kind, seed);
  outcome.metrics.stamp(run_id, std::string(experiment_kind_name(kind)), seed);
  outcome.metrics.write_csv(outcome.paths.csv);

  outcome.wall_time_s = seconds_since(t0);
  const double budget = resolved_budget(cfg, kind);
  outcome.budget_exceeded = outcome.wall_time_s > budget;
  if (outcome.budget_exceeded) {
    outcome.warnings.push_back("run exceeded its soft time budget (" +
                               format_metric(outcome.wall_time_s) + "s > " +
                               format_metric(budget) + "s)");
  }

  nlohmann::json manifest;
  manifest["run_id"] = run_id;
  manifest["experiment"] = std::string(experiment_kind_name(kind));
  manifest["build_id"] = build_id();
  manifest["seed"] = seed;
  manifest["seeds"] = cfg.seeds;
  manifest["stream_kind"] = std::string(stream_kind_name(cfg.stream.kind));
  manifest["task_count"] = cfg.stream.task_count;
  manifest["base_source"] = bundle.base_source;
  manifest["task_tuples"] = bundle.task_tuples;
  manifest["warnings"] = outcome.warnings;
  manifest["wall_time_s"] = outcome.wall_time_s;
  manifest["time_budget_s"] = budget;
  manifest["budget_exceeded"] = outcome.budget_exceeded;
  {
    std::ofstream out(outcome.paths.manifest, std::ios::binary);
    if (!out) throw IntegrityError("cannot write " + outcome.paths.manifest.string());
    out << manifest.dump(2) << "\n";
  }

  return outcome;
}

}  // namespace selfnet
