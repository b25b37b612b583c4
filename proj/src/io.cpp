#include "mir/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mir/imaging.hpp"

namespace fs = std::filesystem;

namespace mir::io {

namespace {

constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;
constexpr int kMaxDims = 8;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back((char)(v & 0xff));
  out.push_back((char)((v >> 8) & 0xff));
  out.push_back((char)((v >> 16) & 0xff));
  out.push_back((char)((v >> 24) & 0xff));
}

std::uint32_t take_u32(const std::string& bytes, std::size_t at) {
  return (std::uint32_t)(unsigned char)bytes[at] |
         ((std::uint32_t)(unsigned char)bytes[at + 1] << 8) |
         ((std::uint32_t)(unsigned char)bytes[at + 2] << 16) |
         ((std::uint32_t)(unsigned char)bytes[at + 3] << 24);
}

void atomic_write(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(strfmt("cannot write %s", tmp.c_str()));
    out.write(bytes.data(), (std::streamsize)bytes.size());
    if (!out) throw DataError(strfmt("short write to %s", tmp.c_str()));
  }
  fs::rename(tmp, path);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(strfmt("cannot open %s", path.c_str()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void write_tensor(const std::string& path, const Tensor<float>& t) {
  if (t.ndim() < 1 || t.ndim() > kMaxDims) {
    throw ShapeError(strfmt("write_tensor: rank %lld outside 1..%d", (long long)t.ndim(),
                            kMaxDims));
  }
  std::string bytes;
  bytes.reserve(8 + 4 * (std::size_t)t.ndim() + 4 * (std::size_t)t.size());
  bytes += "MMIR";
  bytes.push_back((char)kVersion);
  bytes.push_back((char)kDtypeF32);
  bytes.push_back((char)t.ndim());
  bytes.push_back((char)0);
  for (i64 d = 0; d < t.ndim(); ++d) {
    if (t.dim(d) > (i64)UINT32_MAX) throw ShapeError("write_tensor: extent exceeds 32 bits");
    put_u32(bytes, (std::uint32_t)t.dim(d));
  }
  for (i64 i = 0; i < t.size(); ++i) {
    std::uint32_t u;
    std::memcpy(&u, &t.data()[i], 4);
    put_u32(bytes, u);
  }
  atomic_write(path, bytes);
}

Tensor<float> read_tensor(const std::string& path) {
  const std::string bytes = slurp(path);
  if (bytes.size() < 8 || bytes.compare(0, 4, "MMIR") != 0) {
    throw DataError(strfmt("%s: not a tensor container", path.c_str()));
  }
  const auto version = (std::uint8_t)bytes[4];
  const auto dtype = (std::uint8_t)bytes[5];
  const int ndim = (std::uint8_t)bytes[6];
  if (version != kVersion) throw DataError(strfmt("%s: unsupported version %d", path.c_str(), version));
  if (dtype != kDtypeF32) throw DataError(strfmt("%s: unsupported dtype %d", path.c_str(), dtype));
  if (ndim < 1 || ndim > kMaxDims) throw DataError(strfmt("%s: bad rank %d", path.c_str(), ndim));
  if (bytes.size() < 8 + 4 * (std::size_t)ndim) throw DataError(strfmt("%s: truncated header", path.c_str()));
  Shape shape((std::size_t)ndim);
  for (int d = 0; d < ndim; ++d) shape[(std::size_t)d] = (i64)take_u32(bytes, 8 + 4 * (std::size_t)d);
  const i64 n = numel(shape);
  const std::size_t payload_at = 8 + 4 * (std::size_t)ndim;
  if (bytes.size() != payload_at + 4 * (std::size_t)n) {
    throw DataError(strfmt("%s: payload length mismatch", path.c_str()));
  }
  Tensor<float> t = Tensor<float>::zeros(shape);
  for (i64 i = 0; i < n; ++i) {
    const std::uint32_t u = take_u32(bytes, payload_at + 4 * (std::size_t)i);
    std::memcpy(&t.data()[i], &u, 4);
  }
  return t;
}

void write_pgm(const std::string& path, const Tensor<float>& img) {
  const Tensor<float> gray = imaging::magnitude(img);
  const i64 h = gray.dim(0), w = gray.dim(1);
  float lo = gray.data()[0], hi = gray.data()[0];
  for (i64 i = 1; i < gray.size(); ++i) {
    lo = std::min(lo, gray.data()[i]);
    hi = std::max(hi, gray.data()[i]);
  }
  const double scale = hi > lo ? 255.0 / ((double)hi - (double)lo) : 0.0;
  std::string bytes = strfmt("P5\n%lld %lld\n255\n", (long long)w, (long long)h);
  bytes.reserve(bytes.size() + (std::size_t)gray.size());
  for (i64 i = 0; i < gray.size(); ++i) {
    const double v = ((double)gray.data()[i] - (double)lo) * scale;
    bytes.push_back((char)(unsigned char)std::clamp((int)std::lround(v), 0, 255));
  }
  atomic_write(path, bytes);
}

std::string Config::get_str(const std::string& key, const std::string& fallback) {
  seen_.insert(key);
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

i64 Config::get_i64(const std::string& key, i64 fallback) {
  seen_.insert(key);
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    std::size_t pos = 0;
    const i64 v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw UsageError(strfmt("config key %s: '%s' is not an integer", key.c_str(),
                            it->second.c_str()));
  }
}

u64 Config::get_u64(const std::string& key, u64 fallback) {
  seen_.insert(key);
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    std::size_t pos = 0;
    const u64 v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw UsageError(strfmt("config key %s: '%s' is not an unsigned integer", key.c_str(),
                            it->second.c_str()));
  }
}

double Config::get_f64(const std::string& key, double fallback) {
  seen_.insert(key);
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw UsageError(strfmt("config key %s: '%s' is not a number", key.c_str(),
                            it->second.c_str()));
  }
}

bool Config::get_bool(const std::string& key, bool fallback) {
  seen_.insert(key);
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  const std::string& v = it->second;
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw UsageError(strfmt("config key %s: '%s' is not a boolean", key.c_str(), v.c_str()));
}

std::vector<std::string> Config::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values) {
    if (!seen_.count(k)) out.push_back(k);
  }
  return out;
}

Config parse_config_text(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  i64 lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(strfmt("config line %lld: expected `key = value`", (long long)lineno));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(strfmt("config line %lld: empty key", (long long)lineno));
    cfg.values[key] = value;
  }
  return cfg;
}

Config parse_config_file(const std::string& path) { return parse_config_text(slurp(path)); }

namespace {

std::string manifest_text(const net::NetConfig& cfg) {
  std::string s;
  s += strfmt("in_channels = %lld\n", (long long)cfg.in_channels);
  s += strfmt("patch = %lld\n", (long long)cfg.patch);
  s += strfmt("embed = %lld\n", (long long)cfg.embed);
  s += strfmt("groups = %lld\n", (long long)cfg.groups);
  s += strfmt("blocks_per_group = %lld\n", (long long)cfg.blocks_per_group);
  s += strfmt("expansion = %lld\n", (long long)cfg.expansion);
  s += strfmt("n_state = %lld\n", (long long)cfg.n_state);
  s += strfmt("per_direction_ssm = %d\n", cfg.per_direction_ssm ? 1 : 0);
  s += strfmt("exact_bbar = %d\n", cfg.exact_bbar ? 1 : 0);
  s += strfmt("seed = %llu\n", (unsigned long long)cfg.seed);
  return s;
}

net::NetConfig manifest_config(Config& c) {
  net::NetConfig cfg;
  cfg.in_channels = c.get_i64("in_channels", cfg.in_channels);
  cfg.patch = c.get_i64("patch", cfg.patch);
  cfg.embed = c.get_i64("embed", cfg.embed);
  cfg.groups = c.get_i64("groups", cfg.groups);
  cfg.blocks_per_group = c.get_i64("blocks_per_group", cfg.blocks_per_group);
  cfg.expansion = c.get_i64("expansion", cfg.expansion);
  cfg.n_state = c.get_i64("n_state", cfg.n_state);
  cfg.per_direction_ssm = c.get_bool("per_direction_ssm", cfg.per_direction_ssm);
  cfg.exact_bbar = c.get_bool("exact_bbar", cfg.exact_bbar);
  cfg.seed = c.get_u64("seed", cfg.seed);
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& dir, net::ModelParams<float>& params,
                     const net::NetConfig& cfg) {
  fs::create_directories(dir);
  atomic_write((fs::path(dir) / "config.txt").string(), manifest_text(cfg));
  for (auto& [name, t] : net::named_params(params)) {
    write_tensor((fs::path(dir) / (name + ".mmir")).string(), t);
  }
}

std::pair<net::ModelParams<float>, net::NetConfig> load_checkpoint(const std::string& dir) {
  if (!fs::is_directory(dir)) throw UsageError(strfmt("%s: not a checkpoint directory", dir.c_str()));
  Config manifest = parse_config_file((fs::path(dir) / "config.txt").string());
  const net::NetConfig cfg = manifest_config(manifest);
  cfg.validate();
  net::ModelParams<float> params = net::init_model<float>(cfg);
  for (auto& [name, t] : net::named_params(params)) {
    const Tensor<float> loaded = read_tensor((fs::path(dir) / (name + ".mmir")).string());
    if (loaded.shape() != t.shape()) {
      throw DataError(strfmt("checkpoint %s: %s has shape %s, expected %s", dir.c_str(),
                             name.c_str(), shape_str(loaded.shape()).c_str(),
                             shape_str(t.shape()).c_str()));
    }
    std::copy(loaded.data(), loaded.data() + loaded.size(), t.data());
  }
  return {std::move(params), cfg};
}

std::vector<std::string> list_tensors(const std::string& dir, const std::string& prefix) {
  if (!fs::is_directory(dir)) throw UsageError(strfmt("%s: not a directory", dir.c_str()));
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() != ".mmir") continue;
    if (!prefix.empty() && name.rfind(prefix, 0) != 0) continue;
    out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

CsvLogger::CsvLogger(const std::string& path) : path_(path) {
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw DataError(strfmt("cannot write %s", path_.c_str()));
  out << "step,loss,psnr,ssim\n";
}

void CsvLogger::row(i64 step, double loss, double psnr, double ssim) {
  std::ofstream out(path_, std::ios::app);
  out << strfmt("%lld,%.8g,%.6f,%.6f\n", (long long)step, loss, psnr, ssim);
}

}  // namespace mir::io
