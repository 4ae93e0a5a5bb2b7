#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "agn/ndarray.hpp"
#include "agn/param_store.hpp"
#include "agn/tape.hpp"

namespace agn {

struct GradCheckOptions {
  double h = 1e-4;
  double tolerance = 1e-4;
  // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // Coordinates checked per tensor (sampled without replacement); 0 = all.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  bool ok = true;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Coordinates whose +-h evaluations straddle a relu kink; finite differences
  // are not a valid oracle there.
  std::size_t skipped = 0;
  std::string worst;  // "<tensor>[<index>]"
};

// Builds a scalar loss from parameters (read through the tape) and input leaves.
using LossBuilder =
    std::function<Var(Tape&, const ParamStore&, const std::vector<Var>& inputs)>;

// Compares reverse-mode gradients of every input and every parameter in `store`
// against central finite differences.
GradCheckResult gradcheck(const LossBuilder& loss, const ParamStore& store,
                          const std::vector<NDArray>& inputs, const GradCheckOptions& opt = {});

}  // namespace agn
