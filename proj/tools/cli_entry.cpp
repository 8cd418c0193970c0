#include "cli_entry.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "selfnet/experiments.hpp"

namespace selfnet::cli {

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// the state file lives inside a run directory; its config rides along
SelfNetConfig sibling_selfnet_config(const fs::path& state) {
  const fs::path cfg_path = state.parent_path() / "config.cfg";
  if (!fs::exists(cfg_path)) return {};
  return parse_config(slurp(cfg_path), cfg_path.string()).selfnet;
}

void print_summary(const RunOutcome& out) {
  if (out.robustness) {
    const RobustnessChecks checks = robustness_checks(*out.robustness);
    std::cout << "  original accuracy " << format_metric(out.robustness->original_accuracy)
              << ", variants " << out.robustness->variants.size()
              << ", at cosine >= 0.997: " << checks.high_cosine_count << " variants, "
              << format_metric(checks.fraction_within * 100.0)
              << "% within 1.5 points\n";
  }
  if (out.cl_compare) {
    for (const auto& [method, means] : out.cl_compare->stage_mean) {
      std::cout << "  " << method << " final mean accuracy "
                << format_metric(means.back()) << "\n";
    }
    for (const auto& [method, what] : out.cl_compare->failures) {
      std::cout << "  " << method << " FAILED: " << what << "\n";
    }
  }
  if (out.compression) {
    std::cout << "  final mean accuracy " << format_metric(out.compression->final_mean_accuracy)
              << ", compression ratio " << format_metric(out.compression->final_ratio)
              << ", single-batch control " << format_metric(out.compression->single_batch_mean_accuracy)
              << "\n";
  }
  if (out.mixed_arch) {
    std::cout << "  min chunk cosine " << format_metric(out.mixed_arch->min_chunk_cosine)
              << (out.mixed_arch->all_chunks_pass ? " (all chunks pass)" : " (chunks below threshold)")
              << ", split " << format_metric(out.mixed_arch->split_seconds)
              << "s vs fused " << format_metric(out.mixed_arch->fused_seconds) << "s\n";
  }
}

int cmd_run(const std::string& config_path, const std::string& experiment,
            const std::string& out_override, const std::uint64_t* seed_override) {
  const std::string text = slurp(config_path);
  const ExperimentConfig cfg = parse_config(text, config_path);

  ExperimentKind kind;
  if (!experiment.empty()) {
    kind = experiment_kind_from_name(experiment);
  } else if (cfg.experiment_set) {
    kind = cfg.experiment;
  } else {
    throw ConfigError(config_path +
                      ": no 'experiment' key; pass --experiment explicitly");
  }

  const fs::path out_root = out_override.empty() ? fs::path(cfg.out_dir)
                                                 : fs::path(out_override);
  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (seed_override != nullptr) seeds = {*seed_override};

  for (const std::uint64_t seed : seeds) {
    const RunOutcome out = run_experiment(cfg, kind, seed, out_root, text);
    std::cout << out.paths.run_dir.string() << ": " << out.metrics.size()
              << " rows in " << format_metric(out.wall_time_s) << "s\n";
    print_summary(out);
    for (const auto& w : out.warnings) {
      std::cerr << "warning: " << w << "\n";
    }
  }
  return 0;
}

int cmd_recollect(const std::string& state_path, const std::string& task_id,
                  bool eval) {
  const fs::path state(state_path);
  const SelfNet learner = SelfNet::load(state, sibling_selfnet_config(state));

  const ParamVector params = learner.recollect_params(task_id);
  const bool exact = learner.buffer().find(task_id) != nullptr;
  std::cout << "task " << task_id << ": "
            << (exact ? "exact (buffered)" : "decoded (latent store)") << "\n";
  std::cout << "arch:";
  for (const auto d : params.arch_dims) std::cout << " " << d;
  std::cout << "\nparams: " << params.size() << "\n";

  if (!eval) return 0;

  // rebuilding the test set needs the run's config and seed
  const fs::path cfg_path = state.parent_path() / "config.cfg";
  const fs::path manifest_path = state.parent_path() / "manifest.json";
  if (!fs::exists(cfg_path) || !fs::exists(manifest_path)) {
    throw ConfigError("--eval needs config.cfg and manifest.json next to '" +
                      state.string() + "'");
  }
  const ExperimentConfig cfg = parse_config(slurp(cfg_path), cfg_path.string());
  const nlohmann::json manifest = nlohmann::json::parse(slurp(manifest_path));
  const auto seed = manifest.at("seed").get<std::uint64_t>();

  std::vector<std::string> warnings;
  const StreamBundle bundle = build_stream(cfg.stream, seed, warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& spec : bundle.tasks) {
    if (spec.task_id != task_id) continue;
    const DenseNetwork<float> net = learner.recollect(task_id);
    std::cout << "accuracy: " << format_metric(evaluate(net, spec).accuracy) << "\n";
    return 0;
  }
  throw IntegrityError("task '" + task_id + "' is not in the run's stream");
}

int cmd_inspect(const std::string& state_path) {
  const fs::path state(state_path);
  const SelfNet learner = SelfNet::load(state, sibling_selfnet_config(state));

  std::cout << "state: " << state.string() << "\n";
  std::cout << "tasks: " << learner.task_count() << " (buffered "
            << learner.buffer().size() << ", consolidated "
            << learner.latent_store().size() << ")\n";
  for (const auto& id : learner.learned_order()) {
    if (const ParamVector* exact = learner.buffer().find(id)) {
      std::cout << "  " << id << "  exact  q=" << exact->size() << "\n";
    } else {
      const LatentRecord& rec = learner.latent_store().at(id);
      std::cout << "  " << id << "  codes " << rec.code_count() << "x"
                << rec.latent_dim() << "  q=" << rec.original_len << "\n";
    }
  }
  std::cout << "stage: " << learner.stage() << "\n";
  if (learner.chunk_size() > 0) {
    std::cout << "chunk size: " << learner.chunk_size() << "\n";
  }
  if (learner.cae()) {
    const CaeModel& cae = *learner.cae();
    std::cout << "autoencoder: " << cae.input_dim() << "-" << cae.hidden_dim()
              << "-" << cae.latent_dim() << " (" << cae.net.param_count()
              << " params)\n";
  }
  std::cout << "stored latent values: " << learner.stored_value_count() << "\n";
  std::cout << "compression ratio: " << format_metric(learner.compression_ratio())
            << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"continual learning with consolidated task networks"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run an experiment from a config file");
  std::string config_path;
  std::string experiment;
  std::string out_dir;
  std::uint64_t seed = 0;
  run_cmd->add_option("--config", config_path, "experiment config file")->required();
  run_cmd->add_option("--experiment", experiment,
                      "robustness | cl_compare | compression | mixed_arch");
  run_cmd->add_option("--out", out_dir, "output root (overrides out_dir)");
  auto* seed_opt =
      run_cmd->add_option("--seed", seed, "run only this seed (overrides seeds)");

  auto* rec_cmd =
      app.add_subcommand("recollect", "rebuild one task network from a state file");
  std::string state_path;
  std::string task_id;
  bool eval = false;
  rec_cmd->add_option("--state", state_path, "state checkpoint")->required();
  rec_cmd->add_option("--task", task_id, "task id to recollect")->required();
  rec_cmd->add_flag("--eval", eval, "evaluate on the task's rebuilt test set");

  auto* ins_cmd =
      app.add_subcommand("inspect", "task inventory and compression ratio");
  std::string inspect_state;
  ins_cmd->add_option("--state", inspect_state, "state checkpoint")->required();

  try {
    app.parse(argc, argv);
    if (run_cmd->parsed()) {
      const bool seeded = seed_opt->count() > 0;
      return cmd_run(config_path, experiment, out_dir, seeded ? &seed : nullptr);
    }
    if (rec_cmd->parsed()) return cmd_recollect(state_path, task_id, eval);
    return cmd_inspect(inspect_state);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad usage is a configuration problem
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace selfnet::cli
