#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mir/net.hpp"

namespace mir::io {

// Binary tensor container: magic 'M','M','I','R', version byte 1, dtype byte
// 0 (32-bit float), ndim byte, reserved byte 0, then ndim little-endian
// 32-bit extents and the row-major little-endian payload. Writes are atomic
// (temp file, then rename). Round trips are bitwise exact.
void write_tensor(const std::string& path, const Tensor<float>& t);
Tensor<float> read_tensor(const std::string& path);

// 8-bit binary PGM (P5), min-max scaled. 2-channel pairs export their
// magnitude image.
void write_pgm(const std::string& path, const Tensor<float>& img);

// Plain-text `key = value` configuration, UTF-8, `#` starts a comment.
// Lookups mark keys as consumed so callers can reject typos.
struct Config {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  std::string get_str(const std::string& key, const std::string& fallback);
  i64 get_i64(const std::string& key, i64 fallback);
  u64 get_u64(const std::string& key, u64 fallback);
  double get_f64(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  // Keys present in the file but never looked up.
  std::vector<std::string> unused() const;

 private:
  std::set<std::string> seen_;
};

Config parse_config_text(const std::string& text);
Config parse_config_file(const std::string& path);

// A checkpoint is a directory: a `config.txt` manifest with the network
// hyperparameters plus one tensor container per named parameter.
void save_checkpoint(const std::string& dir, net::ModelParams<float>& params,
                     const net::NetConfig& cfg);
std::pair<net::ModelParams<float>, net::NetConfig> load_checkpoint(const std::string& dir);

// Sorted .mmir paths directly inside a directory, optionally restricted to
// basenames starting with a prefix.
std::vector<std::string> list_tensors(const std::string& dir, const std::string& prefix = "");

struct CsvLogger {
  explicit CsvLogger(const std::string& path);
  void row(i64 step, double loss, double psnr, double ssim);

 private:
  std::string path_;
};

}  // namespace mir::io
