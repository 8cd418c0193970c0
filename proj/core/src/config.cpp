#include "selfnet/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "selfnet/optimizer.hpp"

namespace selfnet {

ExperimentKind experiment_kind_from_name(std::string_view name) {
  if (name == "robustness") return ExperimentKind::robustness;
  if (name == "cl_compare") return ExperimentKind::cl_compare;
  if (name == "compression") return ExperimentKind::compression;
  if (name == "mixed_arch") return ExperimentKind::mixed_arch;
  throw ConfigError("unknown experiment kind '" + std::string(name) + "'");
}

std::string_view experiment_kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::robustness: return "robustness";
    case ExperimentKind::cl_compare: return "cl_compare";
    case ExperimentKind::compression: return "compression";
    case ExperimentKind::mixed_arch: return "mixed_arch";
  }
  throw ConfigError("unknown experiment kind value");
}

double default_time_budget_s(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::robustness: return 600.0;
    case ExperimentKind::cl_compare: return 1800.0;
    case ExperimentKind::compression: return 14400.0;
    case ExperimentKind::mixed_arch: return 1800.0;
  }
  return 0.0;
}

namespace {

const std::set<std::string> kKnownMethods = {
    "selfnet", "independent", "sgd", "l2", "l2_online", "ewc", "ewc_online"};

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

class Parser {
 public:
  Parser(const std::string& origin, const std::string& key, const std::string& value)
      : origin_(origin), key_(key), value_(value) {}

  [[noreturn]] void fail(const std::string& want) const {
    throw ConfigError(origin_ + ": key '" + key_ + "': expected " + want + ", got '" +
                      value_ + "'");
  }

  long long integer() const {
    long long v = 0;
    const auto* b = value_.data();
    const auto* e = b + value_.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) fail("integer");
    return v;
  }

  long long positive_int() const {
    long long v = integer();
    if (v <= 0) fail("positive integer");
    return v;
  }

  double number() const {
    try {
      std::size_t used = 0;
      double v = std::stod(value_, &used);
      if (used != value_.size()) fail("number");
      return v;
    } catch (const std::logic_error&) {
      fail("number");
    }
  }

  std::vector<std::string> list() const {
    std::vector<std::string> out;
    std::stringstream ss(value_);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    if (out.empty()) fail("comma-separated list");
    return out;
  }

  const std::string& text() const { return value_; }

 private:
  const std::string& origin_;
  const std::string& key_;
  const std::string& value_;
};

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("config requires an explicit 'seeds' list");
  if (stream.task_count < 1) throw ConfigError("stream.tasks must be >= 1");
  if (stream.train_n == 0 || stream.test_n == 0) {
    throw ConfigError("stream.train_n and stream.test_n must be positive");
  }
  if (stream.synthetic_dims < 1) throw ConfigError("stream.dims must be >= 1");
  if (stream.synthetic_classes < 2) throw ConfigError("stream.classes must be >= 2");
  if (!(stream.synthetic_spread > 0.0)) throw ConfigError("stream.spread must be > 0");
  if (!(stream.split_mix > 0.0 && stream.split_mix < 1.0)) {
    throw ConfigError("stream.split_mix must be inside (0, 1)");
  }
  if (tn_hidden < 1) throw ConfigError("tn.hidden must be >= 1");
  if (schedule.epochs < 0) throw ConfigError("tn.epochs must be >= 0");
  if (schedule.batch_size < 1) throw ConfigError("tn.batch must be >= 1");
  if (!(schedule.learning_rate > 0.0f)) throw ConfigError("tn.lr must be > 0");
  try {
    selfnet.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("selfnet.*: ") + e.what());
  }
  if (methods.empty()) throw ConfigError("methods must not be empty");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (!kKnownMethods.count(m)) throw ConfigError("unknown method '" + m + "'");
    if (!seen.insert(m).second) throw ConfigError("duplicate method '" + m + "'");
  }
  if (baselines.fisher_samples == 0) {
    throw ConfigError("baseline.fisher_samples must be >= 1");
  }
  if (!(baselines.gamma >= 0.0f)) throw ConfigError("baseline.gamma must be >= 0");
  if (noise_levels < 2) throw ConfigError("robustness.levels must be >= 2");
  if (noise_variants < 1) throw ConfigError("robustness.variants must be >= 1");
  if (cae_cutoffs.empty()) throw ConfigError("robustness.cae_cutoffs must not be empty");
  for (std::size_t i = 0; i < cae_cutoffs.size(); ++i) {
    if (cae_cutoffs[i] < 1 || (i > 0 && cae_cutoffs[i] <= cae_cutoffs[i - 1])) {
      throw ConfigError("robustness.cae_cutoffs must be strictly increasing and >= 1");
    }
  }
  if (mixed_small_count < 1) throw ConfigError("mixed.small_count must be >= 1");
  if (mixed_large_hidden < 1) throw ConfigError("mixed.large_hidden must be >= 1");
  if (mixed_large_hidden == tn_hidden) {
    throw ConfigError("mixed.large_hidden must differ from tn.hidden");
  }
  if (time_budget_s < 0.0) throw ConfigError("time_budget_s must be >= 0");
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::set<std::string> seen;

  std::stringstream lines(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(lines, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": empty key or value in '" + line + "'");
    }
    if (!seen.insert(key).second) {
      throw ConfigError(origin + ": duplicate key '" + key + "'");
    }

    const Parser p(origin, key, value);
    try {
      if (key == "experiment") {
        cfg.experiment = experiment_kind_from_name(value);
        cfg.experiment_set = true;
      } else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& s : p.list()) {
          std::uint64_t v = 0;
          auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
          if (ec != std::errc() || ptr != s.data() + s.size()) p.fail("u64 list");
          cfg.seeds.push_back(v);
        }
      } else if (key == "out_dir") {
        cfg.out_dir = value;
      } else if (key == "time_budget_s") {
        cfg.time_budget_s = p.number();
      } else if (key == "methods") {
        cfg.methods = p.list();
      } else if (key == "stream.kind") {
        cfg.stream.kind = stream_kind_from_name(value);
      } else if (key == "stream.tasks") {
        cfg.stream.task_count = static_cast<int>(p.positive_int());
      } else if (key == "stream.train_n") {
        cfg.stream.train_n = static_cast<std::size_t>(p.positive_int());
      } else if (key == "stream.test_n") {
        cfg.stream.test_n = static_cast<std::size_t>(p.positive_int());
      } else if (key == "stream.dims") {
        cfg.stream.synthetic_dims = static_cast<int>(p.positive_int());
      } else if (key == "stream.classes") {
        cfg.stream.synthetic_classes = static_cast<int>(p.positive_int());
      } else if (key == "stream.spread") {
        cfg.stream.synthetic_spread = p.number();
      } else if (key == "stream.split_mix") {
        cfg.stream.split_mix = p.number();
      } else if (key == "tn.hidden") {
        cfg.tn_hidden = static_cast<int>(p.positive_int());
      } else if (key == "tn.epochs") {
        cfg.schedule.epochs = static_cast<int>(p.integer());
      } else if (key == "tn.batch") {
        cfg.schedule.batch_size = static_cast<int>(p.positive_int());
      } else if (key == "tn.optimizer") {
        cfg.schedule.optimizer = optimizer_from_name(value);
      } else if (key == "tn.lr") {
        cfg.schedule.learning_rate = static_cast<float>(p.number());
      } else if (key == "selfnet.m") {
        cfg.selfnet.buffer_capacity = static_cast<std::size_t>(p.positive_int());
      } else if (key == "selfnet.chunk") {
        cfg.selfnet.chunk_size = static_cast<std::size_t>(p.integer());
      } else if (key == "selfnet.d") {
        cfg.selfnet.latent_dim = static_cast<int>(p.positive_int());
      } else if (key == "selfnet.h") {
        cfg.selfnet.hidden_dim = static_cast<int>(p.positive_int());
      } else if (key == "selfnet.anchor_lambda") {
        cfg.selfnet.anchor_lambda = static_cast<float>(p.number());
      } else if (key == "selfnet.activation") {
        cfg.selfnet.hidden_activation = activation_from_name(value);
      } else if (key == "selfnet.threshold") {
        cfg.selfnet.consolidation.cosine_threshold = p.number();
      } else if (key == "selfnet.chunk_floor_slack") {
        cfg.selfnet.consolidation.chunk_floor_slack = p.number();
      } else if (key == "selfnet.max_epochs") {
        cfg.selfnet.consolidation.max_epochs = static_cast<int>(p.positive_int());
      } else if (key == "selfnet.lr") {
        cfg.selfnet.consolidation.learning_rate = static_cast<float>(p.number());
      } else if (key == "selfnet.lambda_c") {
        cfg.selfnet.consolidation.lambda_c = static_cast<float>(p.number());
      } else if (key == "baseline.l2_all") {
        cfg.baselines.l2_all = static_cast<float>(p.number());
      } else if (key == "baseline.l2_online") {
        cfg.baselines.l2_online = static_cast<float>(p.number());
      } else if (key == "baseline.ewc") {
        cfg.baselines.ewc = static_cast<float>(p.number());
      } else if (key == "baseline.ewc_online") {
        cfg.baselines.ewc_online = static_cast<float>(p.number());
      } else if (key == "baseline.fisher_samples") {
        cfg.baselines.fisher_samples = static_cast<std::size_t>(p.positive_int());
      } else if (key == "baseline.gamma") {
        cfg.baselines.gamma = static_cast<float>(p.number());
      } else if (key == "robustness.levels") {
        cfg.noise_levels = static_cast<int>(p.positive_int());
      } else if (key == "robustness.variants") {
        cfg.noise_variants = static_cast<int>(p.positive_int());
      } else if (key == "robustness.cae_cutoffs") {
        cfg.cae_cutoffs.clear();
        for (const auto& s : p.list()) {
          int v = 0;
          auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
          if (ec != std::errc() || ptr != s.data() + s.size()) p.fail("integer list");
          cfg.cae_cutoffs.push_back(v);
        }
      } else if (key == "mixed.small_count") {
        cfg.mixed_small_count = static_cast<int>(p.positive_int());
      } else if (key == "mixed.large_hidden") {
        cfg.mixed_large_hidden = static_cast<int>(p.positive_int());
      } else {
        throw ConfigError(origin + ": unknown config key '" + key + "'");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(origin + ": key '" + key + "': " + e.what());
    }
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.filename().string());
}

}  // namespace selfnet
