#include "selfnet/metrics.hpp"

#include <cstdio>
#include <fstream>

#include "selfnet/errors.hpp"

namespace selfnet {

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void MetricsTable::stamp(const std::string& run_id, const std::string& experiment,
                         std::uint64_t seed) {
  for (auto& r : rows_) {
    r.run_id = run_id;
    r.experiment = experiment;
    r.seed = seed;
  }
}

namespace {

// RFC-4180 quoting, applied only when needed
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string MetricsTable::to_csv() const {
  std::string out(kHeader);
  out += '\n';
  for (const auto& r : rows_) {
    out += csv_field(r.run_id);
    out += ',';
    out += csv_field(r.experiment);
    out += ',';
    out += csv_field(r.method);
    out += ',';
    out += std::to_string(r.stage);
    out += ',';
    out += csv_field(r.task_id);
    out += ',';
    if (r.accuracy) out += format_metric(*r.accuracy);
    out += ',';
    if (r.cosine) out += format_metric(*r.cosine);
    out += ',';
    if (r.consolidation_epochs) out += std::to_string(*r.consolidation_epochs);
    out += ',';
    if (r.compression_ratio) out += format_metric(*r.compression_ratio);
    out += ',';
    if (r.wall_time_s) out += format_metric(*r.wall_time_s);
    out += ',';
    out += std::to_string(r.seed);
    out += '\n';
  }
  return out;
}

void MetricsTable::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings
  if (!out) throw InputError("cannot write CSV file '" + path.string() + "'");
  out << to_csv();
  if (!out) throw InputError("failed writing CSV file '" + path.string() + "'");
}

}  // namespace selfnet
