#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agn {

// Base for every error raised by the library. `kind` is a short stable tag
// ("shape", "value", "io", "format", "config", "train") used by the CLI error records.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

class ValueError : public Error {
 public:
  explicit ValueError(const std::string& what) : Error("value", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format", what) {}
};

class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error("config", what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Training aborted; `step` is the global step that produced the bad value.
class TrainError : public Error {
 public:
  TrainError(std::size_t step, const std::string& what) : Error("train", what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace agn
