#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

namespace ppg {

/// Per-policy-iteration scalar log record. NaN means "not applicable" and is
/// written as an empty CSV cell. The aux_* fields are only populated on the
/// last row of each phase pair, after the auxiliary phase ran.
struct MetricsRow {
  std::int64_t iter = 0;
  std::int64_t env_steps = 0;
  std::int64_t phase = 0;
  double ep_ret_mean = NAN;
  double ep_len_mean = NAN;
  std::int64_t episodes = 0;
  double loss_policy = NAN;
  double loss_value = NAN;
  double entropy = NAN;
  double kl = NAN;
  double clip_frac = NAN;
  double explained_var = NAN;
  double adv_std = NAN;
  double reward_scale = NAN;
  double aux_joint = NAN;
  double aux_mse = NAN;
  double aux_clone_kl = NAN;
  double aux_value = NAN;
};

using RowSink = std::function<void(const MetricsRow&)>;

/// metrics.csv schema v1: a version comment line, a header row, one data row
/// per policy iteration.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void write(const MetricsRow& row);
  const std::string& path() const { return path_; }
  static const char* version_line();
  static const char* header_line();
  static std::string format_row(const MetricsRow& row);

 private:
  std::string path_;
  std::ofstream out_;
};

/// Raw CSV table: cells are kept as the exact strings read from disk so a
/// load/save round trip is byte-identical.
struct CsvTable {
  std::string version_comment;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  static CsvTable load(const std::string& path);
  void save(const std::string& path) const;

  int column_index(const std::string& name) const;
  /// Cells parsed as double; empty cells come back as NaN.
  std::vector<double> numeric_column(const std::string& name) const;
};

}  // namespace ppg
