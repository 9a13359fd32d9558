#pragma once

// Flat dotted-key config files: `key = value` lines, `#` comments, quoted
// strings. Typed getters validate on access.

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "mmesh/core.hpp"

namespace mmesh {

/// Raised on malformed files or invalid values; the CLI maps it to exit 2.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

class Config {
public:
  static Config parse(std::istream& is, const std::string& origin = "<stream>") {
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const std::string stripped = strip_comment(line);
      const auto eq = stripped.find('=');
      if (trim(stripped).empty()) continue;
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected 'key = value'");
      const std::string key = trim(stripped.substr(0, eq));
      std::string value = trim(stripped.substr(eq + 1));
      if (key.empty() || value.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": empty key or value");
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        value = value.substr(1, value.size() - 2);
      cfg.kv_[key] = value;
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream is(path);
    if (!is.good()) throw ConfigError("cannot open config file '" + path + "'");
    return parse(is, path);
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  double get_num(const std::string& key, double fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(it->second, &pos);
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': '" + it->second + "' is not a number");
    }
    if (pos != it->second.size())
      throw ConfigError("key '" + key + "': '" + it->second + "' is not a number");
    return v;
  }

  int get_int(const std::string& key, int fallback) const {
    const double v = get_num(key, fallback);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
      throw ConfigError("key '" + key + "' must be an integer");
    return i;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    if (it->second == "true" || it->second == "on" || it->second == "1") return true;
    if (it->second == "false" || it->second == "off" || it->second == "0") return false;
    throw ConfigError("key '" + key + "' must be a boolean");
  }

  const std::map<std::string, std::string>& items() const { return kv_; }

private:
  static std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> kv_;
};

}  // namespace mmesh
