#include "agn/losses.hpp"

#include <cmath>

#include "agn/error.hpp"
#include "agn/ops.hpp"

namespace agn {

void LossWeights::validate() const {
  for (double x : {alpha, beta, gamma})
    if (!std::isfinite(x) || x < 0) throw ValueError("loss weights must be finite and >= 0");
  if (alpha == 0 && beta == 0 && gamma == 0) throw ValueError("loss weights are all zero");
}

Var cls_loss(Var log_probs, std::span<const ActionId> targets) {
  const Shape& s = log_probs.shape();
  if (s.size() != 3) throw ShapeError("cls_loss expects [n, L, C], got " + shape_str(s));
  const std::size_t n = s[0], l = s[1], c = s[2];
  if (targets.size() != n * l) throw ShapeError("cls_loss: targets do not match positions");
  NDArray onehot({n, l, c}, 0.0);
  for (std::size_t i = 0; i < n * l; ++i) {
    if (targets[i] >= c) throw ValueError("cls_loss: target class out of range");
    onehot[i * c + targets[i]] = 1.0;
  }
  Var picked = ops::sum(ops::mul(log_probs, log_probs.tape->constant(std::move(onehot))));
  return ops::scale(picked, -1.0 / static_cast<double>(n * l));
}

Var reg_loss(Var timing, std::span<const double> targets, std::span<const std::size_t> lengths) {
  const Shape& s = timing.shape();
  if (s.size() != 2) throw ShapeError("reg_loss expects [n, L], got " + shape_str(s));
  const std::size_t n = s[0], l = s[1];
  if (targets.size() != n * l || lengths.size() != n)
    throw ShapeError("reg_loss: targets/lengths do not match");
  NDArray w({n, l}, 0.0), tgt({n, l}, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t len = std::min(lengths[r], l);
    if (len == 0) throw ValueError("reg_loss: label has no supervised timing");
    for (std::size_t i = 0; i < len; ++i) {
      w[r * l + i] = 1.0 / static_cast<double>(len * n);
      tgt[r * l + i] = targets[r * l + i];
    }
  }
  Tape& t = *timing.tape;
  return ops::sum(ops::mul(ops::squared_error(timing, t.constant(std::move(tgt))),
                           t.constant(std::move(w))));
}

Var order_loss(Var timing, std::span<const std::size_t> lengths) {
  const Shape& s = timing.shape();
  if (s.size() != 2) throw ShapeError("order_loss expects [n, L], got " + shape_str(s));
  const std::size_t n = s[0], l = s[1];
  if (lengths.size() != n) throw ShapeError("order_loss: lengths do not match");
  NDArray pairs({n, l, l}, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t len = std::min(lengths[r], l);
    for (std::size_t p = 0; p < len; ++p)
      for (std::size_t q = p + 1; q < len; ++q) pairs[(r * l + p) * l + q] = 1.0 / static_cast<double>(n);
  }
  Var diff = ops::sub(ops::reshape(timing, {n, l, 1}), ops::reshape(timing, {n, 1, l}));
  Var hinge = ops::relu(diff);
  return ops::sum(ops::mul(ops::mul(hinge, hinge), timing.tape->constant(std::move(pairs))));
}

Var total_loss(Var cls, Var reg, Var order, const LossWeights& w) {
  return ops::add(ops::add(ops::scale(cls, w.alpha), ops::scale(reg, w.beta)),
                  ops::scale(order, w.gamma));
}

LossParts combined_loss(Var log_probs, Var timing, std::span<const ActionId> targets,
                        std::span<const double> target_timings,
                        std::span<const std::size_t> lengths, const LossWeights& w) {
  LossParts p;
  p.cls = cls_loss(log_probs, targets);
  p.reg = reg_loss(timing, target_timings, lengths);
  p.order = order_loss(timing, lengths);
  p.total = total_loss(p.cls, p.reg, p.order, w);
  return p;
}

}  // namespace agn
