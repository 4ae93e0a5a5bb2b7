#include "agn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "agn/hash.hpp"

namespace agn {
namespace {

struct Eval {
  double loss;
  std::vector<std::uint8_t> signature;
};

Eval evaluate(const LossBuilder& loss, const ParamStore& store, const std::vector<NDArray>& inputs) {
  Tape tape(false);
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& x : inputs) vars.push_back(tape.variable(x));
  Var l = loss(tape, store, vars);
  return {l.value().item(), tape.kink_signature()};
}

std::vector<std::size_t> coords(std::size_t n, std::size_t max, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (max == 0 || max >= n) return idx;
  for (std::size_t i = 0; i < max; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
  idx.resize(max);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckResult gradcheck(const LossBuilder& loss, const ParamStore& store,
                          const std::vector<NDArray>& inputs, const GradCheckOptions& opt) {
  GradCheckResult res;
  ParamStore work = store;
  work.zero_grad();
  std::vector<NDArray> input_grads;
  {
    Tape tape(true);
    std::vector<Var> vars;
    for (const auto& x : inputs) vars.push_back(tape.variable(x));
    Var l = loss(tape, work, vars);
    tape.backward(l, work);
    for (const Var& v : vars) {
      const NDArray* g = tape.grad_if(v);
      input_grads.push_back(g ? *g : NDArray(v.shape(), 0.0));
    }
  }
  std::mt19937_64 rng(opt.seed);
  auto compare = [&](double analytic, double numeric, const std::string& where) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), opt.floor});
    const double rel = std::fabs(analytic - numeric) / denom;
    ++res.checked;
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst = where;
    }
    if (!(rel < opt.tolerance)) res.ok = false;
  };

  std::vector<NDArray> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i : coords(inputs[k].size(), opt.max_coords, rng)) {
      const double x0 = probe[k][i];
      probe[k][i] = x0 + opt.h;
      Eval up = evaluate(loss, work, probe);
      probe[k][i] = x0 - opt.h;
      Eval dn = evaluate(loss, work, probe);
      probe[k][i] = x0;
      if (up.signature != dn.signature) {
        ++res.skipped;
        continue;
      }
      compare(input_grads[k][i], (up.loss - dn.loss) / (2.0 * opt.h),
              "input" + std::to_string(k) + "[" + std::to_string(i) + "]");
    }
  }

  ParamStore probe_store = work;
  for (const auto& [name, p] : work.params()) {
    auto& val = probe_store.at(name).value;
    for (std::size_t i : coords(p.value.size(), opt.max_coords, rng)) {
      const double x0 = val[i];
      val[i] = x0 + opt.h;
      Eval up = evaluate(loss, probe_store, inputs);
      val[i] = x0 - opt.h;
      Eval dn = evaluate(loss, probe_store, inputs);
      val[i] = x0;
      if (up.signature != dn.signature) {
        ++res.skipped;
        continue;
      }
      compare(p.grad[i], (up.loss - dn.loss) / (2.0 * opt.h), name + "[" + std::to_string(i) + "]");
    }
  }
  return res;
}

}  // namespace agn
