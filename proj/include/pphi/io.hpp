#pragma once

// Run artifacts: flat key=value configs with a stable hash, field snapshot
// archives (fixed 64-byte header + little-endian f64 coefficients, l-major,
// with a JSON sidecar), observable CSVs with a trailing checksum line, and
// the run manifest written before any data.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pphi/sphere.hpp"

namespace pphi {

inline constexpr const char* version_string = "0.1.0";

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// ---------------------------------------------------------------------------
// flat key=value config

class RunConfig {
 public:
  static RunConfig parse(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      size_t a = line.find_first_not_of(" \t\r");
      if (a == std::string::npos) continue;
      size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
      auto trim = [](std::string s) {
        size_t b = s.find_first_not_of(" \t\r");
        size_t e = s.find_last_not_of(" \t\r");
        return (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string val = trim(line.substr(eq + 1));
      if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
      if (cfg.kv_.count(key)) throw std::invalid_argument("config: duplicate key " + key);
      cfg.kv_[key] = val;
    }
    return cfg;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  void reject_unknown_keys(const std::vector<std::string>& allowed) const {
    for (const auto& [k, v] : kv_) {
      bool ok = false;
      for (const auto& a : allowed)
        if (k == a) ok = true;
      if (!ok) throw std::invalid_argument("config: unknown key '" + k + "'");
    }
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string str(const std::string& key, const std::string& dflt = "") const {
    auto it = kv_.find(key);
    return (it == kv_.end()) ? dflt : it->second;
  }

  double num(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size())
      throw std::invalid_argument("config: key '" + key + "' is not a number");
    return v;
  }

  int64_t integer(const std::string& key, int64_t dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    return std::stoll(it->second);
  }

  std::vector<double> num_list(const std::string& key) const {
    std::vector<double> out;
    auto it = kv_.find(key);
    if (it == kv_.end()) return out;
    std::istringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
  }

  void set(const std::string& key, const std::string& val) { kv_[key] = val; }

  // sorted key=value lines; the hash input
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : kv_) out += k + "=" + v + "\n";
    return out;
  }

  uint64_t hash() const { return fnv1a64(canonical()); }

 private:
  std::map<std::string, std::string> kv_;
};

// ---------------------------------------------------------------------------
// field snapshot archive

// 64-byte header: magic[8] = "PPHIFLD\0", u32 version, u32 reserved,
// f64 R, u32 L_max, u32 reserved, u64 count, zero padding.
struct SnapshotHeader {
  char magic[8];
  uint32_t version;
  uint32_t reserved0;
  double R;
  uint32_t L_max;
  uint32_t reserved1;
  uint64_t count;
  char pad[24];
};
static_assert(sizeof(SnapshotHeader) == 64);

inline void check_little_endian() {
  uint16_t x = 1;
  char c;
  std::memcpy(&c, &x, 1);
  if (c != 1) throw std::runtime_error("snapshot format requires a little-endian host");
}

inline void write_field_archive(const std::string& path,
                                const std::vector<SpectralField>& fields,
                                const nlohmann::json& sidecar_meta = {}) {
  if (fields.empty()) throw std::invalid_argument("write_field_archive: no fields");
  check_little_endian();
  SnapshotHeader h{};
  std::memcpy(h.magic, "PPHIFLD\0", 8);
  h.version = 1;
  h.R = fields[0].R;
  h.L_max = uint32_t(fields[0].L_max);
  h.count = fields.size();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(&h), sizeof(h));
  for (const auto& f : fields) {
    if (f.L_max != fields[0].L_max || f.R != fields[0].R)
      throw std::invalid_argument("write_field_archive: inhomogeneous archive");
    out.write(reinterpret_cast<const char*>(f.coeffs.data()),
              std::streamsize(f.coeffs.size() * sizeof(double)));
  }
  out.close();

  nlohmann::json side = sidecar_meta;
  side["format"] = "pphi-field-archive";
  side["version"] = 1;
  side["R"] = fields[0].R;
  side["L_max"] = fields[0].L_max;
  side["count"] = fields.size();
  side["coeff_layout"] = "l-major, index l*l + l + m, m in [-l, l]";
  std::ofstream js(path + ".json");
  js << side.dump(2) << "\n";
}

inline std::vector<SpectralField> read_field_archive(const std::string& path) {
  check_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open archive: " + path);
  SnapshotHeader h{};
  in.read(reinterpret_cast<char*>(&h), sizeof(h));
  if (std::memcmp(h.magic, "PPHIFLD\0", 8) != 0)
    throw std::runtime_error("bad snapshot magic in " + path);
  if (h.version != 1) throw std::runtime_error("unsupported snapshot version");
  std::vector<SpectralField> out;
  out.reserve(h.count);
  for (uint64_t i = 0; i < h.count; ++i) {
    SpectralField f(h.R, int(h.L_max));
    in.read(reinterpret_cast<char*>(f.coeffs.data()),
            std::streamsize(f.coeffs.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated archive: " + path);
    out.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV with a trailing checksum line

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) {
    for (size_t i = 0; i < header.size(); ++i)
      body_ += header[i] + (i + 1 < header.size() ? "," : "\n");
  }

  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i)
      body_ += cells[i] + (i + 1 < cells.size() ? "," : "\n");
  }

  std::string finish() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(body_)));
    return body_ + "#checksum=fnv1a:" + buf + "\n";
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << finish();
  }

 private:
  std::string body_;
};

inline bool csv_checksum_ok(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open csv: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string all = ss.str();
  size_t mark = all.rfind("#checksum=fnv1a:");
  if (mark == std::string::npos) return false;
  std::string body = all.substr(0, mark);
  std::string stored = all.substr(mark + 16, 16);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(body)));
  return stored == buf;
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// run manifest

class RunManifest {
 public:
  RunManifest(const std::filesystem::path& dir, const std::string& command,
              const RunConfig& cfg, const std::vector<uint64_t>& chain_seeds = {})
      : dir_(dir) {
    doc_["command"] = command;
    doc_["code_version"] = version_string;
    doc_["config_text"] = cfg.canonical();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(cfg.hash()));
    doc_["config_hash"] = std::string(buf);
    doc_["chain_seeds"] = chain_seeds;
    doc_["artifacts"] = nlohmann::json::array();
    doc_["complete"] = false;
    save(); // manifest exists before any data file
  }

  void add_artifact(const std::string& name) {
    uint64_t sum = 0;
    std::ifstream in(dir_ / name, std::ios::binary);
    if (!in) throw std::runtime_error("manifest: missing artifact " + name);
    std::stringstream ss;
    ss << in.rdbuf();
    sum = fnv1a64(ss.str());
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(sum));
    doc_["artifacts"].push_back({{"name", name}, {"checksum", std::string(buf)}});
    save();
  }

  void finalize() {
    doc_["complete"] = true;
    save();
  }

 private:
  void save() const {
    std::ofstream out(dir_ / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest");
    out << doc_.dump(2) << "\n";
  }

  std::filesystem::path dir_;
  nlohmann::json doc_;
};

} // namespace pphi
