#include "agn/kvconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "agn/error.hpp"

namespace agn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text, const std::string& origin) {
  KvConfig c;
  std::istringstream in(text);
  std::string line;
  for (int no = 1; std::getline(in, line); ++no) {
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(no);
    if (eq == std::string::npos) throw FormatError(where + ": expected key=value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw FormatError(where + ": empty key");
    if (c.values_.count(key)) throw ConfigError(key, where + ": duplicate key '" + key + "'");
    c.values_[key] = value;
  }
  return c;
}

KvConfig KvConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path);
}

std::optional<std::string> KvConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(key);
  return it->second;
}

std::optional<double> KvConfig::real(const std::string& key) const {
  auto s = str(key);
  if (!s) return std::nullopt;
  double v = 0;
  auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
  if (ec != std::errc() || p != s->data() + s->size())
    throw ConfigError(key, "'" + key + "' expects a number, got '" + *s + "'");
  return v;
}

std::optional<std::int64_t> KvConfig::integer(const std::string& key) const {
  auto s = str(key);
  if (!s) return std::nullopt;
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
  if (ec != std::errc() || p != s->data() + s->size())
    throw ConfigError(key, "'" + key + "' expects an integer, got '" + *s + "'");
  return v;
}

std::optional<bool> KvConfig::boolean(const std::string& key) const {
  auto s = str(key);
  if (!s) return std::nullopt;
  if (*s == "1" || *s == "true" || *s == "yes" || *s == "on") return true;
  if (*s == "0" || *s == "false" || *s == "no" || *s == "off") return false;
  throw ConfigError(key, "'" + key + "' expects a boolean, got '" + *s + "'");
}

void KvConfig::reject_unknown() const {
  for (const auto& [k, v] : values_)
    if (!used_.count(k)) throw ConfigError(k, "unknown key '" + k + "'");
}

}  // namespace agn
