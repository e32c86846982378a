#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "finr/errors.hpp"

namespace finr {

/// Flat `key = value` configuration with `#` comments. Unknown keys are
/// rejected against the caller's registry so typos fail loudly.
class Config {
 public:
  void load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config: line " + std::to_string(lineno) + " is not `key = value`");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string val = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw ConfigError("config: empty key at line " + std::to_string(lineno));
      kv_[key] = val;
    }
  }

  void set(const std::string& key, const std::string& val) { kv_[key] = val; }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string get_str(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("config: key `" + key + "` is not a number: " + it->second);
    }
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const std::int64_t v = std::stoll(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("config: key `" + key + "` is not an integer: " + it->second);
    }
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      return std::stoull(it->second);
    } catch (...) {
      throw ConfigError("config: key `" + key + "` is not an unsigned integer: " + it->second);
    }
  }

  /// Comma-separated numeric list.
  template <typename T>
  std::vector<T> get_list(const std::string& key, const std::vector<T>& fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<T> out;
    std::stringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      try {
        if constexpr (std::is_integral_v<T>)
          out.push_back(static_cast<T>(std::stoll(tok)));
        else
          out.push_back(static_cast<T>(std::stod(tok)));
      } catch (...) {
        throw ConfigError("config: key `" + key + "` has a bad list entry: " + tok);
      }
    }
    return out;
  }

  void require_known(const std::set<std::string>& known) const {
    for (const auto& [key, val] : kv_)
      if (!known.count(key)) throw ConfigError("config: unknown key `" + key + "`");
  }

  /// Canonical serialization (sorted keys) for manifests.
  std::string echo() const {
    std::ostringstream os;
    for (const auto& [key, val] : kv_) os << key << " = " << val << "\n";
    return os.str();
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  std::map<std::string, std::string> kv_;
};

}  // namespace finr
