#pragma once

#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "ppg/common.hpp"
#include "ppg/param.hpp"

namespace ppg {

// Checkpoint container, format "PPGCKPT1" (see docs/file_formats.md):
// little-endian; a fixed header (version, scalar width, step counters)
// followed by one section per parameter set, each holding named tensors
// with their Adam first/second moments and per-parameter step counts.

namespace ckpt_detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline void put_u64(std::FILE* f, std::uint64_t v) { std::fwrite(&v, 8, 1, f); }
inline void put_str(std::FILE* f, const std::string& s) {
  put_u64(f, s.size());
  std::fwrite(s.data(), 1, s.size(), f);
}
inline std::uint64_t get_u64(std::FILE* f) {
  std::uint64_t v = 0;
  if (std::fread(&v, 8, 1, f) != 1) throw NumericError("checkpoint: truncated");
  return v;
}
inline std::string get_str(std::FILE* f) {
  std::string s(get_u64(f), '\0');
  if (!s.empty() && std::fread(s.data(), 1, s.size(), f) != s.size())
    throw NumericError("checkpoint: truncated");
  return s;
}

template <class S>
void put_mat(std::FILE* f, const Mat<S>& m) {
  put_u64(f, static_cast<std::uint64_t>(m.rows()));
  put_u64(f, static_cast<std::uint64_t>(m.cols()));
  std::fwrite(m.data(), sizeof(S), static_cast<std::size_t>(m.size()), f);
}

template <class S>
Mat<S> get_mat(std::FILE* f) {
  const auto rows = static_cast<Eigen::Index>(get_u64(f));
  const auto cols = static_cast<Eigen::Index>(get_u64(f));
  Mat<S> m(rows, cols);
  if (std::fread(m.data(), sizeof(S), static_cast<std::size_t>(m.size()), f) !=
      static_cast<std::size_t>(m.size()))
    throw NumericError("checkpoint: truncated");
  return m;
}

}  // namespace ckpt_detail

template <class S>
struct CheckpointSection {
  std::string name;  // "policy" or "value"
  ParameterSet<S>* params = nullptr;
  Adam<S>* optimizer = nullptr;
};

template <class S>
void save_checkpoint(const std::string& path, std::int64_t env_steps,
                     std::int64_t iteration,
                     const std::vector<CheckpointSection<S>>& sections) {
  using namespace ckpt_detail;
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw NumericError("cannot open checkpoint '" + path + "' for writing");
  std::fwrite("PPGCKPT1", 1, 8, f.get());
  put_u64(f.get(), 1);  // format version
  put_u64(f.get(), sizeof(S));
  put_u64(f.get(), static_cast<std::uint64_t>(env_steps));
  put_u64(f.get(), static_cast<std::uint64_t>(iteration));
  put_u64(f.get(), sections.size());
  for (const auto& sec : sections) {
    put_str(f.get(), sec.name);
    put_u64(f.get(), static_cast<std::uint64_t>(sec.params->size()));
    for (int i = 0; i < sec.params->size(); ++i) {
      const auto& p = sec.params->at(i);
      put_str(f.get(), p.name);
      put_mat(f.get(), p.value);
      put_mat(f.get(), sec.optimizer->first_moments()[static_cast<std::size_t>(i)]);
      put_mat(f.get(), sec.optimizer->second_moments()[static_cast<std::size_t>(i)]);
      put_u64(f.get(), static_cast<std::uint64_t>(
                           sec.optimizer->step_counts()[static_cast<std::size_t>(i)]));
    }
  }
}

template <class S>
void load_checkpoint(const std::string& path, std::int64_t* env_steps,
                     std::int64_t* iteration,
                     const std::vector<CheckpointSection<S>>& sections) {
  using namespace ckpt_detail;
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw NumericError("cannot open checkpoint '" + path + "'");
  char magic[8];
  if (std::fread(magic, 1, 8, f.get()) != 8 || std::memcmp(magic, "PPGCKPT1", 8) != 0)
    throw NumericError("'" + path + "' is not a checkpoint");
  if (get_u64(f.get()) != 1) throw NumericError("unsupported checkpoint version");
  if (get_u64(f.get()) != sizeof(S))
    throw ConfigError("checkpoint precision does not match configured precision");
  const auto steps = static_cast<std::int64_t>(get_u64(f.get()));
  const auto iter = static_cast<std::int64_t>(get_u64(f.get()));
  if (env_steps) *env_steps = steps;
  if (iteration) *iteration = iter;
  const std::uint64_t nsec = get_u64(f.get());
  if (nsec != sections.size())
    throw ConfigError("checkpoint has " + std::to_string(nsec) +
                      " sections, expected " + std::to_string(sections.size()));
  for (const auto& sec : sections) {
    const std::string name = get_str(f.get());
    if (name != sec.name)
      throw ConfigError("checkpoint section '" + name + "' does not match '" +
                        sec.name + "'");
    const auto count = static_cast<int>(get_u64(f.get()));
    if (count != sec.params->size())
      throw ConfigError("checkpoint parameter count mismatch in '" + name + "'");
    for (int i = 0; i < count; ++i) {
      auto& p = sec.params->at(i);
      const std::string pname = get_str(f.get());
      if (pname != p.name)
        throw ConfigError("checkpoint tensor '" + pname + "' does not match '" +
                          p.name + "'");
      Mat<S> v = get_mat<S>(f.get());
      require_shape(v.rows() == p.value.rows() && v.cols() == p.value.cols(),
                    "checkpoint tensor shape for " + pname);
      p.value = std::move(v);
      sec.optimizer->first_moments()[static_cast<std::size_t>(i)] = get_mat<S>(f.get());
      sec.optimizer->second_moments()[static_cast<std::size_t>(i)] = get_mat<S>(f.get());
      sec.optimizer->step_counts()[static_cast<std::size_t>(i)] =
          static_cast<std::int64_t>(get_u64(f.get()));
    }
  }
}

}  // namespace ppg
