#include <cmath>
#include <random>

#include "agn/error.hpp"
#include "agn/gradcheck.hpp"
#include "agn/hash.hpp"
#include "agn/losses.hpp"
#include "agn/ops.hpp"
#include "doctest.h"

using namespace agn;

namespace {

double order_of(std::vector<double> t) {
  Tape tape;
  const std::size_t n = t.size();
  std::vector<std::size_t> len = {n};
  return order_loss(tape.constant(NDArray({1, n}, t)), len).value().item();
}

// Independent pairwise oracle.
double order_oracle(const std::vector<double>& t) {
  double s = 0;
  for (std::size_t p = 0; p < t.size(); ++p)
    for (std::size_t q = p + 1; q < t.size(); ++q) s += std::pow(std::max(t[p] - t[q], 0.0), 2);
  return s;
}

}  // namespace

TEST_CASE("order loss identities") {
  CHECK(order_of({0.2, 0.5, 0.8}) == 0.0);
  CHECK(std::fabs(order_of({0.5, 0.2}) - 0.09) < 1e-12);
  CHECK(std::fabs(order_of({0.9, 0.5, 0.1}) - 0.96) < 1e-12);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> t(1 + uniform_index(rng, 6));
    for (double& x : t) x = uniform01(rng);
    CHECK(std::fabs(order_of(t) - order_oracle(t)) < 1e-12);
    bool sorted = std::is_sorted(t.begin(), t.end());
    CHECK((order_of(t) == 0.0) == sorted);
  }
}

TEST_CASE("order loss only counts supervised positions") {
  Tape tape;
  std::vector<std::size_t> len = {2};
  Var v = order_loss(tape.constant(NDArray::matrix(1, 4, {0.1, 0.3, 0.0, 0.9})), len);
  CHECK(v.value().item() == 0.0);
}

TEST_CASE("classification loss") {
  const std::size_t c = 5;
  Tape tape;
  std::vector<ActionId> tgt = {1, 4, 0};
  Var uniform = ops::log_softmax(tape.constant(NDArray({1, 3, c}, 0.0)));
  CHECK(std::fabs(cls_loss(uniform, tgt).value().item() - std::log(5.0)) < 1e-9);

  NDArray oh({1, 3, c}, -1e9);
  for (std::size_t i = 0; i < 3; ++i) oh[i * c + tgt[i]] = 0;
  Var perfect = ops::log_softmax(tape.constant(oh));
  CHECK(std::fabs(cls_loss(perfect, tgt).value().item()) < 1e-12);

  NDArray moved({1, 3, c}, 0.0);
  moved[1] = 0.5;
  CHECK(cls_loss(ops::log_softmax(tape.constant(moved)), tgt).value().item() < std::log(5.0));
}

TEST_CASE("regression loss") {
  Tape tape;
  std::vector<double> tgt = {0.2, 0.0, 0.0};
  std::vector<std::size_t> len = {1};
  Var a = reg_loss(tape.constant(NDArray::matrix(1, 3, {0.5, 0.3, 0.9})), tgt, len);
  CHECK(std::fabs(a.value().item() - 0.09) < 1e-12);
  Var b = reg_loss(tape.constant(NDArray::matrix(1, 3, {0.5, 0.7, 0.1})), tgt, len);
  CHECK(a.value().item() == b.value().item());
  Var z = reg_loss(tape.constant(NDArray::matrix(1, 3, {0.2, 0.7, 0.1})), tgt, len);
  CHECK(z.value().item() == 0.0);
  std::vector<std::size_t> none = {0};
  CHECK_THROWS_AS(reg_loss(tape.constant(NDArray::matrix(1, 3, {0.2, 0.7, 0.1})), tgt, none), ValueError);
}

TEST_CASE("weighted total") {
  Tape t;
  auto s = [&](double x) { return t.constant(NDArray::scalar(x)); };
  CHECK(std::fabs(total_loss(s(1.0), s(0.5), s(0.1), {}).value().item() - 1.51) < 1e-12);
  CHECK(total_loss(s(1.0), s(0.5), s(7.0), {1, 1, 0}).value().item() == 1.5);
  CHECK(total_loss(s(0), s(0), s(0), {}).value().item() == 0.0);
  CHECK_THROWS_AS((LossWeights{0, 0, 0}.validate()), ValueError);
  CHECK_THROWS_AS((LossWeights{-1, 0, 0}.validate()), ValueError);
}

TEST_CASE("total loss gradient equals weighted component gradients") {
  std::mt19937_64 rng(4);
  const std::size_t n = 2, l = 4, c = 5;
  NDArray logits({n, l, c}), timing({n, l});
  for (auto& x : logits.raw()) x = uniform(rng, -2, 2);
  for (auto& x : timing.raw()) x = uniform(rng, -2, 2);
  std::vector<ActionId> tgt = {0, 1, 2, 4, 3, 3, 4, 4};
  std::vector<double> tt = {0, 0.3, 0.6, 0, 0.1, 0.2, 0, 0};
  std::vector<std::size_t> len = {3, 2};
  auto build = [&](LossWeights w) {
    return [&, w](Tape&, const ParamStore&, const std::vector<Var>& in) {
      return combined_loss(ops::log_softmax(in[0]), ops::sigmoid(in[1]), tgt, tt, len, w).total;
    };
  };
  GradCheckResult r = gradcheck(build({1, 1, 0.1}), ParamStore{}, {logits, timing});
  CHECK(r.ok);

  // gradient of the total equals the weighted sum of the component gradients
  auto grad_of = [&](LossWeights w) {
    Tape t;
    Var a = t.variable(logits), b = t.variable(timing);
    Var loss = combined_loss(ops::log_softmax(a), ops::sigmoid(b), tgt, tt, len, w).total;
    t.backward(loss);
    return std::make_pair(t.grad(a.id), t.grad(b.id));
  };
  auto tot = grad_of({1, 2, 0.5});
  auto gc = grad_of({1, 0, 0});
  auto gr = grad_of({0, 1, 0});
  auto go = grad_of({0, 0, 1});
  for (std::size_t i = 0; i < timing.size(); ++i)
    CHECK(std::fabs(tot.second[i] - (gc.second[i] + 2 * gr.second[i] + 0.5 * go.second[i])) < 1e-12);
  for (std::size_t i = 0; i < logits.size(); ++i) CHECK(std::fabs(tot.first[i] - gc.first[i]) < 1e-12);
}
