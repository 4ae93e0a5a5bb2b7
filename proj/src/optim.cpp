#include "agn/optim.hpp"

#include <cmath>

#include "agn/error.hpp"

namespace agn {

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  const std::int64_t t = store.step() + 1;
  store.set_step(t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& [_, p] : store.params()) {
    auto& g = p.grad.raw();
    auto& m = p.m.raw();
    auto& v = p.v.raw();
    auto& w = p.value.raw();
    bool any = false;
    for (double x : g)
      if (x != 0.0) {
        any = true;
        break;
      }
    if (!any) {
      for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] *= cfg.beta1;
        v[i] *= cfg.beta2;
      }
      continue;
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  store.zero_grad();
}

double clip_grad_norm(ParamStore& store, double max_norm) {
  if (!(max_norm > 0.0)) throw ValueError("clip norm must be positive");
  const double norm = store.grad_norm();
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [_, p] : store.params())
      for (auto& g : p.grad.raw()) g *= s;
  }
  return norm;
}

}  // namespace agn
