#pragma once

#include "maskcov/common.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace maskcov::harness {

/// Flat key/value configuration with optional [section] headers.
///
///   # comment
///   seed = 7            <- global (section "")
///   [sweep]
///   n_list = 64, 128
///
/// Lookups in a section fall back to the global section. Values are kept as
/// strings; typed getters parse on access and throw ConfigError.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  std::optional<std::string> find(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long long get_int(const std::string& section, const std::string& key) const;
  long long get_int(const std::string& section, const std::string& key, long long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& section, const std::string& key) const;
  std::vector<long long> get_int_list(const std::string& section, const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& section, const std::string& key) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

  /// Every (key, value) visible from a section, globals first then section
  /// entries, in file order. Used to echo provenance into outputs.
  std::vector<std::pair<std::string, std::string>> entries(const std::string& section) const;

 private:
  struct Entry {
    std::string key;
    std::string value;
  };
  std::map<std::string, std::vector<Entry>> sections_;
};

std::vector<std::string> split_list(const std::string& text, char sep = ',');
double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);

}  // namespace maskcov::harness
