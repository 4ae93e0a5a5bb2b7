#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "agn/ndarray.hpp"

namespace agn {

struct Init {
  enum class Kind { kXavier, kZeros, kOnes, kUniform };
  Kind kind = Kind::kXavier;
  double bound = 0.0;  // kUniform only

  static Init xavier() { return {Kind::kXavier, 0.0}; }
  static Init zeros() { return {Kind::kZeros, 0.0}; }
  static Init ones() { return {Kind::kOnes, 0.0}; }
  static Init uniform(double bound) { return {Kind::kUniform, bound}; }
};

struct Parameter {
  NDArray value;
  NDArray grad;
  NDArray m;  // Adam first moment
  NDArray v;  // Adam second moment
};

// Named learnable parameters keyed by dotted path. Initial values depend only on
// (seed, path), never on registration order.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  // Registers a parameter; re-registering an existing path with the same shape is
  // a no-op, with a different shape it throws.
  Parameter& add(const std::string& path, Shape shape, Init init);
  // Inserts (or overwrites) a parameter with an explicit value.
  Parameter& set(const std::string& path, NDArray value);

  bool contains(const std::string& path) const { return params_.count(path) != 0; }
  Parameter& at(const std::string& path);
  const Parameter& at(const std::string& path) const;
  const NDArray& value(const std::string& path) const { return at(path).value; }

  const std::map<std::string, Parameter>& params() const noexcept { return params_; }
  std::map<std::string, Parameter>& params() noexcept { return params_; }
  std::vector<std::string> names() const;

  void zero_grad();
  double grad_norm() const;
  std::size_t num_values() const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::int64_t step() const noexcept { return step_; }
  void set_step(std::int64_t s) noexcept { step_ = s; }

 private:
  std::uint64_t seed_;
  std::int64_t step_ = 0;
  std::map<std::string, Parameter> params_;
};

}  // namespace agn
