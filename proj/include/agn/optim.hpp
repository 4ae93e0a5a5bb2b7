#pragma once

#include "agn/param_store.hpp"

namespace agn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update over every parameter, then zeroes gradients.
// A parameter whose gradient is identically zero keeps its value; its moments
// still decay.
void adam_step(ParamStore& store, const AdamConfig& cfg);

// Rescales all gradients so their global L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_grad_norm(ParamStore& store, double max_norm);

}  // namespace agn
