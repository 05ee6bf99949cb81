#include "ppg/metrics.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "ppg/common.hpp"

namespace ppg {

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const char* MetricsWriter::version_line() { return "# ppg-metrics v1"; }

const char* MetricsWriter::header_line() {
  return "iter,env_steps,phase,ep_ret_mean,ep_len_mean,episodes,loss_policy,"
         "loss_value,entropy,kl,clip_frac,explained_var,adv_std,reward_scale,"
         "aux_joint,aux_mse,aux_clone_kl,aux_value";
}

std::string MetricsWriter::format_row(const MetricsRow& r) {
  std::ostringstream s;
  s << r.iter << ',' << r.env_steps << ',' << r.phase << ','
    << fmt_double(r.ep_ret_mean) << ',' << fmt_double(r.ep_len_mean) << ','
    << r.episodes << ',' << fmt_double(r.loss_policy) << ','
    << fmt_double(r.loss_value) << ',' << fmt_double(r.entropy) << ','
    << fmt_double(r.kl) << ',' << fmt_double(r.clip_frac) << ','
    << fmt_double(r.explained_var) << ',' << fmt_double(r.adv_std) << ','
    << fmt_double(r.reward_scale) << ',' << fmt_double(r.aux_joint) << ','
    << fmt_double(r.aux_mse) << ',' << fmt_double(r.aux_clone_kl) << ','
    << fmt_double(r.aux_value);
  return s.str();
}

MetricsWriter::MetricsWriter(const std::string& path) : path_(path), out_(path) {
  if (!out_) throw ConfigError("cannot open metrics file '" + path + "'");
  out_ << version_line() << '\n' << header_line() << '\n';
  out_.flush();
}

void MetricsWriter::write(const MetricsRow& row) {
  out_ << format_row(row) << '\n';
  out_.flush();
}

CsvTable CsvTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV '" + path + "'");
  CsvTable t;
  std::string line;
  bool header_seen = false;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    out.push_back(cur);
    return out;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (!header_seen) t.version_comment = line;
      continue;
    }
    if (!header_seen) {
      t.columns = split(line);
      header_seen = true;
    } else {
      auto cells = split(line);
      if (cells.size() != t.columns.size())
        throw ConfigError("CSV '" + path + "': row with " +
                          std::to_string(cells.size()) + " cells, expected " +
                          std::to_string(t.columns.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  if (!header_seen) throw ConfigError("CSV '" + path + "' has no header row");
  return t;
}

void CsvTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  if (!version_comment.empty()) out << version_comment << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i)
    out << columns[i] << (i + 1 < columns.size() ? "," : "");
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? "," : "");
    out << '\n';
  }
}

int CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<double> CsvTable::numeric_column(const std::string& name) const {
  const int idx = column_index(name);
  if (idx < 0) throw ConfigError("CSV column '" + name + "' not found");
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    const std::string& cell = row[static_cast<std::size_t>(idx)];
    out.push_back(cell.empty() ? NAN : std::strtod(cell.c_str(), nullptr));
  }
  return out;
}

}  // namespace ppg
