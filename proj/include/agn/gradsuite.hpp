#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "agn/gradcheck.hpp"

namespace agn {

struct GradSuiteCase {
  std::string name;  // "op:<operator>" or "module:<module>"
  std::uint64_t seed = 0;
  GradCheckResult result;
};

struct GradSuiteReport {
  std::vector<GradSuiteCase> cases;

  bool ok() const;
  double max_rel_error() const;
  std::size_t failures() const;
};

struct GradSuiteOptions {
  std::size_t seeds = 20;
  std::uint64_t base_seed = 0;
  GradCheckOptions check;  // h = 1e-4, tolerance 1e-4
  // Parameter coordinates sampled per tensor for the composed modules.
  std::size_t module_coords = 3;
};

// Names of every case run per seed, in run order.
std::vector<std::string> grad_suite_cases();

// Finite-difference checks of every tape operator and of the composed modules
// (cam_forward, encode_history per HSE mode, teacher_forced_logits, total_loss),
// each on fresh random inputs and parameters per seed.
GradSuiteReport run_grad_suite(const GradSuiteOptions& opt,
                               const std::function<void(const GradSuiteCase&)>& on_case = {});

}  // namespace agn
