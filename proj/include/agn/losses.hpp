#pragma once

#include <span>

#include "agn/domain.hpp"
#include "agn/tape.hpp"

namespace agn {

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 0.1;

  void validate() const;
};

// All batched losses are per-sample values averaged over the batch.

// Mean over the L positions of -log p(target); targets are [n * L] class ids.
Var cls_loss(Var log_probs, std::span<const ActionId> targets);
// Mean squared timing error over the first lengths[r] positions of each row.
Var reg_loss(Var timing, std::span<const double> targets, std::span<const std::size_t> lengths);
// Sum over pairs p < q < lengths[r] of max(T_p - T_q, 0)^2.
Var order_loss(Var timing, std::span<const std::size_t> lengths);
Var total_loss(Var cls, Var reg, Var order, const LossWeights& w);

struct LossParts {
  Var cls, reg, order, total;
};

LossParts combined_loss(Var log_probs, Var timing, std::span<const ActionId> targets,
                        std::span<const double> target_timings,
                        std::span<const std::size_t> lengths, const LossWeights& w);

}  // namespace agn
