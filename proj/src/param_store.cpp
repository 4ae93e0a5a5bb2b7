#include "agn/param_store.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "agn/error.hpp"
#include "agn/hash.hpp"

namespace agn {

double standard_normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Parameter& ParamStore::add(const std::string& path, Shape shape, Init init) {
  if (auto it = params_.find(path); it != params_.end()) {
    if (it->second.value.shape() != shape)
      throw ShapeError("parameter " + path + " re-registered with shape " + shape_str(shape) +
                       ", existing " + shape_str(it->second.value.shape()));
    return it->second;
  }
  NDArray value(shape, 0.0);
  std::mt19937_64 rng(derive_seed(seed_, path));
  switch (init.kind) {
    case Init::Kind::kZeros:
      break;
    case Init::Kind::kOnes:
      value.fill(1.0);
      break;
    case Init::Kind::kXavier: {
      double fan_in = 1, fan_out = 1;
      if (shape.size() >= 2) {
        fan_in = static_cast<double>(shape[shape.size() - 2]);
        fan_out = static_cast<double>(shape[shape.size() - 1]);
      } else if (shape.size() == 1) {
        fan_in = 1;
        fan_out = static_cast<double>(shape[0]);
      }
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& x : value.raw()) x = uniform(rng, -bound, bound);
      break;
    }
    case Init::Kind::kUniform:
      for (auto& x : value.raw()) x = uniform(rng, -init.bound, init.bound);
      break;
  }
  return set(path, std::move(value));
}

Parameter& ParamStore::set(const std::string& path, NDArray value) {
  if (path.empty()) throw ValueError("empty parameter path");
  Parameter p;
  p.grad = NDArray(value.shape(), 0.0);
  p.m = NDArray(value.shape(), 0.0);
  p.v = NDArray(value.shape(), 0.0);
  p.value = std::move(value);
  auto [it, _] = params_.insert_or_assign(path, std::move(p));
  return it->second;
}

Parameter& ParamStore::at(const std::string& path) {
  auto it = params_.find(path);
  if (it == params_.end()) throw ValueError("unknown parameter " + path);
  return it->second;
}

const Parameter& ParamStore::at(const std::string& path) const {
  auto it = params_.find(path);
  if (it == params_.end()) throw ValueError("unknown parameter " + path);
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [k, _] : params_) out.push_back(k);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.fill(0.0);
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& [_, p] : params_)
    for (double g : p.grad.raw()) s += g * g;
  return std::sqrt(s);
}

std::size_t ParamStore::num_values() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

}  // namespace agn
