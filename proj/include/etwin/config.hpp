// Structured key-value run configuration.
//
// Syntax: `[section]` headers, `key = value` entries, full-line comments
// starting with '#' or ';'.  Values are stored verbatim (trimmed); typed
// accessors parse on demand and raise ConfigError with the section/key in
// the message.  The canonical hash covers every (section, key, value)
// triple in sorted order, so reordering a file does not change its hash but
// any semantic edit does.
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "etwin/core.hpp"

namespace etwin {

class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    ConfigFile c = from_string(ss.str());
    c.source_ = path;
    return c;
  }

  static ConfigFile from_string(const std::string& text) {
    ConfigFile c;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = trim(line);
      if (s.empty() || s[0] == '#' || s[0] == ';') continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw ConfigError("config line " + std::to_string(lineno) +
                            ": unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        if (section.empty())
          throw ConfigError("config line " + std::to_string(lineno) +
                            ": empty section name");
        c.sections_[section];  // materialize even if empty
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": expected key = value");
      std::string key = trim(s.substr(0, eq));
      std::string value = trim(s.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": empty key");
      if (section.empty())
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": key outside any [section]");
      c.sections_[section][key] = value;
    }
    return c;
  }

  const std::string& source() const { return source_; }

  bool has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  void set(const std::string& section, const std::string& key,
           const std::string& value) {
    sections_[section][key] = value;
  }

  std::string get(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end() || !s->second.count(key))
      throw ConfigError("config: missing required key [" + section + "] " +
                        key);
    return s->second.at(key);
  }

  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
  }

  double get_double(const std::string& section, const std::string& key) const {
    return parse_typed<double>(section, key, get(section, key));
  }
  double get_double_or(const std::string& section, const std::string& key,
                       double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
  }

  long long get_long(const std::string& section, const std::string& key) const {
    return parse_typed<long long>(section, key, get(section, key));
  }
  long long get_long_or(const std::string& section, const std::string& key,
                        long long fallback) const {
    return has(section, key) ? get_long(section, key) : fallback;
  }

  bool get_bool(const std::string& section, const std::string& key) const {
    std::string v = get(section, key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: [" + section + "] " + key +
                      " must be a boolean (got '" + v + "')");
  }
  bool get_bool_or(const std::string& section, const std::string& key,
                   bool fallback) const {
    return has(section, key) ? get_bool(section, key) : fallback;
  }

  // comma-separated integer list
  std::vector<int> get_int_list(const std::string& section,
                                const std::string& key) const {
    std::string v = get(section, key);
    std::vector<int> out;
    std::string item;
    std::istringstream ss(v);
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      out.push_back(static_cast<int>(
          parse_typed<long long>(section, key, item)));
    }
    if (out.empty())
      throw ConfigError("config: [" + section + "] " + key +
                        " must be a non-empty integer list");
    return out;
  }

  const std::map<std::string, std::map<std::string, std::string>>& sections()
      const {
    return sections_;
  }

  // Order-independent content hash over all entries.
  std::uint64_t canonical_hash() const {
    Fnv1a h;
    for (const auto& [sec, kv] : sections_) {  // std::map: sorted
      h.feed(sec);
      for (const auto& [k, v] : kv) {
        h.feed(k);
        h.feed(v);
      }
    }
    return h.digest();
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  template <typename T>
  T parse_typed(const std::string& section, const std::string& key,
                const std::string& value) const {
    try {
      if constexpr (std::is_same_v<T, double>) {
        return parse_double(value);
      } else {
        return parse_long(value);
      }
    } catch (const IoError&) {
      throw ConfigError("config: [" + section + "] " + key +
                        " has invalid numeric value '" + value + "'");
    }
  }

  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::string source_;
};

}  // namespace etwin
