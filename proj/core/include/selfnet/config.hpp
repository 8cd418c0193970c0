#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "selfnet/continual.hpp"
#include "selfnet/data.hpp"

namespace selfnet {

enum class ExperimentKind { robustness, cl_compare, compression, mixed_arch };

ExperimentKind experiment_kind_from_name(std::string_view name);
std::string_view experiment_kind_name(ExperimentKind k);

// Regularization strengths frozen after a one-off grid search on a held-out
// 3-task stream (grids: {1e-3, 1e-2, 1e-1} for the L2 family, {10, 100, 1000}
// for the EWC family).
struct BaselineParams {
  float l2_all = 1e-3f;
  float l2_online = 1e-3f;
  float ewc = 100.0f;
  float ewc_online = 100.0f;
  std::size_t fisher_samples = 256;
  float gamma = 1.0f;
};

// Everything an experiment run needs, parsed from a flat key = value file.
// Unknown keys are errors. Seeds must be listed explicitly.
struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::robustness;
  bool experiment_set = false;  // true when the config names one

  TaskStreamSpec stream;
  int tn_hidden = 27;  // task-network hidden width
  TrainSchedule schedule;

  SelfNetConfig selfnet;
  BaselineParams baselines;
  std::vector<std::string> methods = {"selfnet",   "independent", "sgd", "l2",
                                      "l2_online", "ewc",         "ewc_online"};

  // robustness sweep
  int noise_levels = 13;
  int noise_variants = 4;
  std::vector<int> cae_cutoffs = {2, 5, 10, 25, 60, 150};

  // mixed-architecture study
  int mixed_small_count = 5;
  int mixed_large_hidden = 54;

  std::vector<std::uint64_t> seeds;
  std::string out_dir = "runs";
  double time_budget_s = 0.0;  // 0 = per-experiment default

  void validate() const;
};

// Soft wall-clock budget used when the config leaves time_budget_s at 0.
double default_time_budget_s(ExperimentKind k);

ExperimentConfig parse_config(const std::string& text, const std::string& origin);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace selfnet
