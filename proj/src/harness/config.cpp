#include "maskcov/harness/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace maskcov::harness {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

}  // namespace

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string body = trim(text);
  if (body.size() >= 2 && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = unquote(trim(item));
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("cannot parse '" + text + "' as a number for " + what);
  return v;
}

long long parse_int(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("cannot parse '" + text + "' as an integer for " + what);
  return v;
}

Config Config::parse(const std::string& text) {
  Config cfg;
  std::string section;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  cfg.sections_[section];
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      cfg.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    cfg.set(section, key, value);
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  auto& entries = sections_[section];
  for (auto& e : entries) {
    if (e.key == key) {
      e.value = value;
      return;
    }
  }
  entries.push_back({key, value});
}

std::optional<std::string> Config::find(const std::string& section, const std::string& key) const {
  for (const auto& name : {section, std::string()}) {
    const auto it = sections_.find(name);
    if (it == sections_.end()) continue;
    for (const auto& e : it->second)
      if (e.key == key) return e.value;
  }
  return std::nullopt;
}

bool Config::has(const std::string& section, const std::string& key) const {
  return find(section, key).has_value();
}

std::string Config::get_string(const std::string& section, const std::string& key) const {
  auto v = find(section, key);
  if (!v) throw ConfigError("missing config key '" + key + "' in section [" + section + "]");
  return *v;
}

std::string Config::get_string(const std::string& section, const std::string& key, const std::string& fallback) const {
  return find(section, key).value_or(fallback);
}

double Config::get_double(const std::string& section, const std::string& key) const {
  return parse_double(get_string(section, key), key);
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
  auto v = find(section, key);
  return v ? parse_double(*v, key) : fallback;
}

long long Config::get_int(const std::string& section, const std::string& key) const {
  return parse_int(get_string(section, key), key);
}

long long Config::get_int(const std::string& section, const std::string& key, long long fallback) const {
  auto v = find(section, key);
  return v ? parse_int(*v, key) : fallback;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  auto v = find(section, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError("cannot parse '" + *v + "' as a boolean for " + key);
}

std::vector<double> Config::get_double_list(const std::string& section, const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get_string(section, key))) out.push_back(parse_double(item, key));
  return out;
}

std::vector<long long> Config::get_int_list(const std::string& section, const std::string& key) const {
  std::vector<long long> out;
  for (const auto& item : split_list(get_string(section, key))) out.push_back(parse_int(item, key));
  return out;
}

std::vector<std::string> Config::get_string_list(const std::string& section, const std::string& key) const {
  return split_list(get_string(section, key));
}

std::vector<std::pair<std::string, std::string>> Config::entries(const std::string& section) const {
  std::vector<std::pair<std::string, std::string>> out;
  const auto global = sections_.find("");
  if (global != sections_.end())
    for (const auto& e : global->second) out.emplace_back(e.key, e.value);
  if (!section.empty()) {
    const auto it = sections_.find(section);
    if (it != sections_.end())
      for (const auto& e : it->second) out.emplace_back(section + "." + e.key, e.value);
  }
  return out;
}

}  // namespace maskcov::harness
