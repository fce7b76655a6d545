#pragma once

/// \file params.hpp
/// \brief Parameter files:
///
///     # comment
///     [solver]            # section; nest with [a.b]
///     tol = 1e-8
///     method = cg
///     markers = 1, 2, 3   # real or integer lists
///
/// Keys are addressed by dotted path ("solver.tol"). Values are kept as text
/// and coerced by the typed accessors.

#include <charconv>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "core.hpp"

namespace pfem {

class ParamTree {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static ParamTree parse(std::string_view text) {
    ParamTree t;
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t eol = std::min(text.find('\n', pos), text.size());
      std::string line(text.substr(pos, eol - pos));
      pos = eol + 1;
      ++line_no;
      if (const auto h = find_comment(line); h != std::string::npos) line.erase(h);
      line = trim(line);
      if (line.empty()) {
        if (eol == text.size()) break;
        continue;
      }
      if (line.front() == '[') {
        if (line.back() != ']') throw ParseError("malformed section header", line_no);
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty() || !valid_path(section)) throw ParseError("invalid section name '" + section + "'", line_no);
      } else {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || !valid_path(key)) throw ParseError("invalid key '" + key + "'", line_no);
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        const std::string path = section.empty() ? key : section + "." + key;
        if (t.entries_.contains(path))
          throw ParseError("duplicate key '" + path + "' (first set on line " + std::to_string(t.entries_[path].line) + ")",
                           line_no);
        t.entries_[path] = {value, line_no};
      }
      if (eol == text.size()) break;
    }
    return t;
  }

  static ParamTree load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open parameter file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& path) const { return entries_.contains(path); }

  std::string get_string(const std::string& path) const { return raw(path).value; }
  std::string get_string(const std::string& path, const std::string& fallback) const {
    return has(path) ? get_string(path) : fallback;
  }

  double get_real(const std::string& path) const {
    const Entry& e = raw(path);
    return to_real(e.value, path, e.line);
  }
  double get_real(const std::string& path, double fallback) const { return has(path) ? get_real(path) : fallback; }

  long long get_int(const std::string& path) const {
    const Entry& e = raw(path);
    long long v = 0;
    const auto* end = e.value.data() + e.value.size();
    const auto r = std::from_chars(e.value.data(), end, v);
    if (r.ec != std::errc{} || r.ptr != end) throw bad_value(path, e, "an integer");
    return v;
  }
  long long get_int(const std::string& path, long long fallback) const { return has(path) ? get_int(path) : fallback; }

  bool get_bool(const std::string& path) const {
    const Entry& e = raw(path);
    if (e.value == "true" || e.value == "yes" || e.value == "on" || e.value == "1") return true;
    if (e.value == "false" || e.value == "no" || e.value == "off" || e.value == "0") return false;
    throw bad_value(path, e, "a boolean");
  }
  bool get_bool(const std::string& path, bool fallback) const { return has(path) ? get_bool(path) : fallback; }

  std::vector<double> get_real_list(const std::string& path) const {
    const Entry& e = raw(path);
    std::vector<double> out;
    std::string item;
    std::stringstream ss(e.value);
    while (std::getline(ss, item, ',')) {
      std::stringstream ws(item);
      std::string tok;
      while (ws >> tok) out.push_back(to_real(tok, path, e.line));
    }
    return out;
  }
  std::vector<double> get_real_list(const std::string& path, std::vector<double> fallback) const {
    return has(path) ? get_real_list(path) : fallback;
  }

  std::vector<int> get_int_list(const std::string& path, std::vector<int> fallback = {}) const {
    if (!has(path)) return fallback;
    std::vector<int> out;
    for (double v : get_real_list(path)) {
      if (v != std::floor(v)) throw bad_value(path, raw(path), "a list of integers");
      out.push_back(static_cast<int>(v));
    }
    return out;
  }

  /// Keys never read through an accessor.
  std::vector<std::string> unused_keys() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [k, e] : entries_)
      if (!used_.contains(k)) out.push_back(k);
    return out;
  }

  void warn_unused() const {
    for (const auto& k : unused_keys()) log().warn("parameter '{}' (line {}) was never used", k, entries_.at(k).line);
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  /// '#' outside double quotes.
  static std::size_t find_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return i;
    }
    return std::string::npos;
  }

  static bool valid_path(const std::string& s) {
    if (s.front() == '.' || s.back() == '.' || s.find("..") != std::string::npos) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'; });
  }

  static double to_real(const std::string& s, const std::string& path, int line) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    if (r.ec != std::errc{} || r.ptr != end)
      throw ConfigError("parameter '" + path + "' (line " + std::to_string(line) + "): '" + s + "' is not a number");
    return v;
  }

  static ConfigError bad_value(const std::string& path, const Entry& e, const char* what) {
    return ConfigError("parameter '" + path + "' (line " + std::to_string(e.line) + "): '" + e.value + "' is not " + what);
  }

  const Entry& raw(const std::string& path) const {
    const auto it = entries_.find(path);
    if (it == entries_.end()) throw ConfigError("missing parameter '" + path + "'");
    std::lock_guard lock(mutex_);
    used_.insert(path);
    return it->second;
  }

  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> used_;
  mutable std::mutex mutex_;

 public:
  ParamTree() = default;
  ParamTree(const ParamTree& o) : entries_(o.entries_), used_(o.used_) {}
  ParamTree& operator=(const ParamTree& o) {
    entries_ = o.entries_;
    used_ = o.used_;
    return *this;
  }
};

}  // namespace pfem
