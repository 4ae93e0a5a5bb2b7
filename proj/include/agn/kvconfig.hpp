#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <type_traits>

#include "agn/error.hpp"

namespace agn {

// Plain-text key=value settings. '#' starts a comment; blank lines are ignored;
// keys may not repeat.
class KvConfig {
 public:
  KvConfig() = default;
  static KvConfig parse(const std::string& text, const std::string& origin = "<string>");
  static KvConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  // Typed reads mark the key as consumed. Malformed values throw ConfigError.
  std::optional<std::string> str(const std::string& key) const;
  std::optional<double> real(const std::string& key) const;
  std::optional<std::int64_t> integer(const std::string& key) const;
  std::optional<bool> boolean(const std::string& key) const;

  template <class T>
  void read(const std::string& key, T& out) const;

  // Throws ConfigError for the first key never read.
  void reject_unknown() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

template <class T>
void KvConfig::read(const std::string& key, T& out) const {
  if constexpr (std::is_same_v<T, bool>) {
    if (auto v = boolean(key)) out = *v;
  } else if constexpr (std::is_floating_point_v<T>) {
    if (auto v = real(key)) out = *v;
  } else if constexpr (std::is_integral_v<T>) {
    if (auto v = integer(key)) {
      if (std::is_unsigned_v<T> && *v < 0) throw ConfigError(key, "must be non-negative");
      out = static_cast<T>(*v);
    }
  } else {
    if (auto v = str(key)) out = *v;
  }
}

}  // namespace agn
