#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace selfnet {

// One observation: a (stage, task, method) cell plus whatever stage-level
// figures apply to it. Absent values serialize as empty CSV fields.
struct MetricsRow {
  std::string run_id;
  std::string experiment;
  std::string method;
  int stage = 0;
  std::string task_id;
  std::optional<double> accuracy;
  std::optional<double> cosine;
  std::optional<long> consolidation_epochs;
  std::optional<double> compression_ratio;
  std::optional<double> wall_time_s;
  std::uint64_t seed = 0;
};

// Append-only table with a fixed column set. Numeric formatting is
// deterministic so reruns with the same seed produce identical bytes
// (wall_time_s excepted).
class MetricsTable {
 public:
  static constexpr std::string_view kHeader =
      "run_id,experiment,method,stage,task_id,accuracy,cosine,"
      "consolidation_epochs,compression_ratio,wall_time_s,seed";

  void add(MetricsRow row) { rows_.push_back(std::move(row)); }
  const std::vector<MetricsRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  // applies run-level identity to every row (arms only fill their own cells)
  void stamp(const std::string& run_id, const std::string& experiment,
             std::uint64_t seed);

  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<MetricsRow> rows_;
};

// "%.10g" — compact, deterministic, and lossless enough for comparisons
std::string format_metric(double v);

}  // namespace selfnet
