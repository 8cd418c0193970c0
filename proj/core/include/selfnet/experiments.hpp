#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selfnet/baselines.hpp"
#include "selfnet/config.hpp"
#include "selfnet/metrics.hpp"

namespace selfnet {

// The task sequence an experiment runs over, plus its provenance for the
// run manifest. MNIST-backed when SELFNET_DATA_DIR holds the IDX files,
// synthetic otherwise.
struct StreamBundle {
  std::vector<TaskSpec> tasks;
  std::string base_source;              // "mnist" | "synthetic"
  std::vector<std::string> task_tuples; // per-task composition strings
  int input_dims = 0;
  int class_count = 0;
};

StreamBundle build_stream(const TaskStreamSpec& spec, std::uint64_t run_seed,
                          std::vector<std::string>& warnings);

// task-network architecture used across experiments
ArchDescriptor task_arch(const StreamBundle& bundle, int hidden,
                         Activation activation);

struct RobustnessVariant {
  std::string arm;  // "noise" | "cae"
  double cosine = 0.0;
  double accuracy = 0.0;
};

struct RobustnessSummary {
  double original_accuracy = 0.0;
  std::vector<RobustnessVariant> variants;  // first entry is the zero-noise row
};

struct RobustnessChecks {
  bool zero_noise_identity = false;
  std::size_t high_cosine_count = 0;  // variants at cosine >= threshold
  double fraction_within = 0.0;       // of those, fraction losing <= tolerance
  bool monotone_ok = false;
  int inversions = 0;
  double worst_inversion_points = 0.0;
};

RobustnessSummary run_robustness(const ExperimentConfig& cfg, const StreamBundle& bundle,
                                 std::uint64_t seed, MetricsTable& table,
                                 std::vector<std::string>& warnings);

RobustnessChecks robustness_checks(const RobustnessSummary& s,
                                   double cosine_threshold = 0.997,
                                   double tolerance_points = 1.5, int bins = 6,
                                   double inversion_slack_points = 0.5);

struct ClCompareSummary {
  // method -> mean accuracy over seen tasks, indexed by stage - 1
  std::map<std::string, std::vector<double>> stage_mean;
  std::map<std::string, std::string> failures;  // method -> error message
};

ClCompareSummary run_cl_compare(const ExperimentConfig& cfg, const StreamBundle& bundle,
                                std::uint64_t seed, MetricsTable& table,
                                std::vector<std::string>& warnings,
                                const std::filesystem::path* state_out = nullptr);

struct CompressionSummary {
  std::vector<int> stage_epochs;
  std::vector<double> stage_mean_accuracy;
  std::vector<double> stage_ratio;
  double final_mean_accuracy = 0.0;
  double final_ratio = 0.0;
  double single_batch_mean_accuracy = 0.0;
};

CompressionSummary run_compression(const ExperimentConfig& cfg, const StreamBundle& bundle,
                                   std::uint64_t seed, MetricsTable& table,
                                   std::vector<std::string>& warnings,
                                   const std::filesystem::path* state_out = nullptr);

struct MixedArchSummary {
  std::vector<std::string> task_ids;
  std::vector<double> original_accuracy;
  std::vector<double> recollected_accuracy;
  std::vector<double> task_cosine;
  double min_chunk_cosine = 0.0;
  bool all_chunks_pass = false;
  std::size_t large_chunk_count = 0;
  double split_seconds = 0.0;  // consolidating r chunks of size n
  double fused_seconds = 0.0;  // one autoencoder with input r*n
};

MixedArchSummary run_mixed_arch(const ExperimentConfig& cfg, const StreamBundle& bundle,
                                std::uint64_t seed, MetricsTable& table,
                                std::vector<std::string>& warnings);

struct RunPaths {
  std::filesystem::path run_dir;
  std::filesystem::path config_copy;
  std::filesystem::path manifest;
  std::filesystem::path csv;
  std::filesystem::path state;  // present for selfnet-bearing experiments
};

struct RunOutcome {
  RunPaths paths;
  MetricsTable metrics;
  std::vector<std::string> warnings;
  double wall_time_s = 0.0;
  bool budget_exceeded = false;
  std::optional<RobustnessSummary> robustness;
  std::optional<ClCompareSummary> cl_compare;
  std::optional<CompressionSummary> compression;
  std::optional<MixedArchSummary> mixed_arch;
};

// VCS revision baked in at configure time; "unknown" outside a checkout
std::string build_id();

std::string make_run_id(ExperimentKind kind, std::uint64_t seed);

// Full orchestration: run directory, lock file, config copy, experiment
// dispatch, CSV, manifest. `config_text` is copied verbatim into the run dir.
RunOutcome run_experiment(const ExperimentConfig& cfg, ExperimentKind kind,
                          std::uint64_t seed, const std::filesystem::path& out_root,
                          const std::string& config_text);

}  // namespace selfnet
