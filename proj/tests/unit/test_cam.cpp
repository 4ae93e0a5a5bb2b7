#include <cmath>
#include <random>

#include "agn/cam.hpp"
#include "agn/error.hpp"
#include "agn/gradcheck.hpp"
#include "agn/hash.hpp"
#include "agn/ops.hpp"
#include "doctest.h"

using namespace agn;

namespace {

NDArray random_array(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  NDArray a(std::move(s));
  for (auto& v : a.raw()) v = uniform(rng, lo, hi);
  return a;
}

CamConfig small_config(bool causal = false, bool ctx = true) {
  CamConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ctx = 5;
  c.mlp_hidden = 12;
  c.gate_hidden = 6;
  c.causal = causal;
  c.context_aware = ctx;
  return c;
}

struct Run {
  NDArray out;
  std::vector<NDArray> attn;
  NDArray gate;
};

Run run(const Cam& cam, const ParamStore& store, const NDArray& seq, const NDArray& ctx,
        const NDArray& mask, const std::optional<NDArray>& gate = std::nullopt) {
  Tape t(false);
  CamOutput o = cam.forward(t, store, t.constant(seq), t.constant(ctx), mask, gate);
  Run r{o.out.value(), {}, o.gate.value()};
  for (Var a : o.attention) r.attn.push_back(a.value());
  return r;
}

}  // namespace

TEST_CASE("config validation") {
  CamConfig c = small_config();
  c.n_heads = 3;
  CHECK_THROWS_AS(Cam("x", c), ValueError);
  c = small_config();
  c.mlp_hidden = 0;
  CHECK_THROWS_AS(Cam("x", c), ValueError);
}

TEST_CASE("parameter paths") {
  ParamStore s;
  Cam("cam.a", small_config()).register_params(s);
  CHECK(s.contains("cam.a.gate.w1"));
  CHECK(s.value("cam.a.head0.wq").shape() == Shape{13, 4});
  CHECK(s.value("cam.a.head1.wv").shape() == Shape{8, 8});
  ParamStore p;
  Cam("cam.b", small_config(false, false)).register_params(p);
  CHECK(!p.contains("cam.b.gate.w1"));
  CHECK(p.value("cam.b.head0.wq").shape() == Shape{8, 4});
}

TEST_CASE("ctx dimension mismatch is rejected") {
  ParamStore s(1);
  Cam cam("c", small_config());
  cam.register_params(s);
  std::mt19937_64 rng(2);
  Tape t;
  CHECK_THROWS_AS(cam.forward(t, s, t.constant(random_array({2, 3, 8}, rng)),
                              t.constant(random_array({2, 4}, rng)), NDArray({2, 3}, 0.0)),
                  ShapeError);
}

TEST_CASE("one-hot gate equals the head-0 pathway") {
  ParamStore s(3);
  Cam cam("c", small_config());
  cam.register_params(s);
  std::mt19937_64 rng(4);
  NDArray seq = random_array({1, 4, 8}, rng), ctx = random_array({1, 5}, rng);
  NDArray mask({1, 4}, 0.0);
  Run r = run(cam, s, seq, ctx, mask, NDArray::matrix(1, 2, {1, 0}));

  // head-0 pathway computed by hand from the stored parameters
  Tape t(false);
  Var x = t.constant(seq);
  Var q = ops::add(ops::matmul(x, ops::slice(t.param(s, "c.head0.wq"), 0, 0, 8)),
                   ops::reshape(ops::matmul(t.constant(ctx), ops::slice(t.param(s, "c.head0.wq"), 0, 8, 13)),
                                {1, 1, 4}));
  Var k = ops::matmul(x, t.param(s, "c.head0.wk"));
  Var v = ops::matmul(x, t.param(s, "c.head0.wv"));
  Var a = ops::softmax(ops::scale(ops::matmul(q, ops::transpose(k)), 0.5));
  Var h = ops::matmul(a, v);
  Var y = affine_layer_norm(t, s, ops::add(x, h), "c.ln1");
  Var f = linear(t, s, ops::relu(linear(t, s, y, "c.ffn.w1", "c.ffn.b1")), "c.ffn.w2", "c.ffn.b2");
  Var out = affine_layer_norm(t, s, ops::add(y, f), "c.ln2");
  CHECK(r.out == out.value());
}

TEST_CASE("singleton sequence attends to itself with weight one") {
  ParamStore s(5);
  Cam cam("c", small_config());
  cam.register_params(s);
  std::mt19937_64 rng(6);
  Run r = run(cam, s, random_array({3, 1, 8}, rng), random_array({3, 5}, rng), NDArray({3, 1}, 0.0));
  for (auto& a : r.attn)
    for (double w : a.raw()) CHECK(w == 1.0);
}

TEST_CASE("context changes attention when query context weights are nonzero") {
  ParamStore s(7);
  Cam cam("c", small_config());
  cam.register_params(s);
  std::mt19937_64 rng(8);
  NDArray seq = random_array({1, 4, 8}, rng);
  Run a = run(cam, s, seq, random_array({1, 5}, rng), NDArray({1, 4}, 0.0));
  Run b = run(cam, s, seq, random_array({1, 5}, rng), NDArray({1, 4}, 0.0));
  double diff = 0;
  for (std::size_t i = 0; i < a.attn[0].size(); ++i) diff = std::max(diff, std::fabs(a.attn[0][i] - b.attn[0][i]));
  CHECK(diff > 1e-6);
}

TEST_CASE("plain attention ignores the context") {
  ParamStore s(7);
  Cam cam("c", small_config(false, false));
  cam.register_params(s);
  std::mt19937_64 rng(8);
  NDArray seq = random_array({2, 4, 8}, rng);
  Run a = run(cam, s, seq, random_array({2, 5}, rng), NDArray({2, 4}, 0.0));
  Run b = run(cam, s, seq, random_array({2, 5}, rng), NDArray({2, 4}, 0.0));
  CHECK(a.out == b.out);
  for (std::size_t h = 0; h < a.attn.size(); ++h) CHECK(a.attn[h] == b.attn[h]);
  for (double g : a.gate.raw()) CHECK(g == 0.5);
}

TEST_CASE("attention rows and gate are simplices") {
  ParamStore s(9);
  Cam cam("c", small_config());
  cam.register_params(s);
  std::mt19937_64 rng(10);
  NDArray mask({3, 5}, 0.0);
  mask[3] = mask[4] = mask[9] = 1.0;
  Run r = run(cam, s, random_array({3, 5, 8}, rng, -3, 3), random_array({3, 5}, rng, -3, 3), mask);
  for (auto& a : r.attn) {
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t i = 0; i < 5; ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < 5; ++j) {
          double w = a[(b * 5 + i) * 5 + j];
          if (mask[b * 5 + j] != 0) CHECK(w < 1e-12);
          sum += w;
        }
        CHECK(std::fabs(sum - 1) < 1e-9);
      }
  }
  for (std::size_t b = 0; b < 3; ++b) {
    double sum = 0;
    for (std::size_t h = 0; h < 2; ++h) {
      CHECK(r.gate.at(b, h) >= 0);
      sum += r.gate.at(b, h);
    }
    CHECK(std::fabs(sum - 1) < 1e-9);
  }
}

TEST_CASE("causal rows ignore later tokens") {
  ParamStore s(11);
  Cam cam("c", small_config(true));
  cam.register_params(s);
  std::mt19937_64 rng(12);
  NDArray seq = random_array({1, 5, 8}, rng), ctx = random_array({1, 5}, rng);
  NDArray mask({1, 5}, 0.0);
  Run base = run(cam, s, seq, ctx, mask);
  for (std::size_t j = 1; j < 5; ++j) {
    NDArray p = seq;
    for (std::size_t d = 0; d < 8; ++d) p[j * 8 + d] += 0.7;
    Run r = run(cam, s, p, ctx, mask);
    for (std::size_t i = 0; i < j; ++i)
      for (std::size_t d = 0; d < 8; ++d) CHECK(r.out[i * 8 + d] == base.out[i * 8 + d]);
    bool changed = false;
    for (std::size_t d = 0; d < 8; ++d) changed = changed || r.out[j * 8 + d] != base.out[j * 8 + d];
    CHECK(changed);
  }
}

TEST_CASE("PAD content is invisible to unmasked rows") {
  ParamStore s(13);
  Cam cam("c", small_config());
  cam.register_params(s);
  std::mt19937_64 rng(14);
  NDArray seq = random_array({1, 5, 8}, rng), ctx = random_array({1, 5}, rng);
  NDArray mask({1, 5}, 0.0);
  mask[1] = mask[4] = 1.0;
  Run base = run(cam, s, seq, ctx, mask);
  NDArray p = seq;
  for (std::size_t d = 0; d < 8; ++d) {
    p[8 + d] = uniform(rng, -5, 5);
    p[32 + d] = uniform(rng, -5, 5);
  }
  Run r = run(cam, s, p, ctx, mask);
  for (std::size_t i : {0, 2, 3})
    for (std::size_t d = 0; d < 8; ++d) CHECK(r.out[i * 8 + d] == base.out[i * 8 + d]);
}

TEST_CASE("fully masked query rows are defined") {
  ParamStore s(15);
  Cam cam("c", small_config());
  cam.register_params(s);
  std::mt19937_64 rng(16);
  Run r = run(cam, s, random_array({2, 3, 8}, rng), random_array({2, 5}, rng),
              NDArray::matrix(2, 3, {1, 1, 1, 0, 1, 0}));
  CHECK(r.out.all_finite());
  for (auto& a : r.attn)
    for (std::size_t k = 0; k < 9; ++k) CHECK(a[k] == 0.0);
}

TEST_CASE("pooling") {
  Tape t;
  NDArray rows({1, 3, 2}, 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    rows[i * 2] = 1.5;
    rows[i * 2 + 1] = -2;
  }
  Var p = cam_pool(t.constant(rows), NDArray({1, 3}, 0.0));
  CHECK(p.value().at(0, 0) == doctest::Approx(1.5));
  CHECK(p.value().at(0, 1) == doctest::Approx(-2));

  NDArray r2 = NDArray({1, 3, 1}, 0.0);
  r2[0] = 1;
  r2[1] = 100;
  r2[2] = 3;
  Var q = cam_pool(t.constant(r2), NDArray::matrix(1, 3, {0, 1, 0}));
  CHECK(q.value().item() == doctest::Approx(2.0));
  NDArray r3 = r2;
  std::swap(r3[0], r3[2]);
  CHECK(cam_pool(t.constant(r3), NDArray::matrix(1, 3, {0, 1, 0})).value().item() == q.value().item());

  CHECK_THROWS_AS(cam_pool(t.constant(r2), NDArray({1, 3}, 1.0)), ValueError);
  CHECK(masked_mean(t.constant(r2), NDArray({1, 3}, 1.0)).value().item() == 0.0);
}

TEST_CASE("gradient check through the whole block") {
  for (bool causal : {false, true}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      ParamStore s(100 + seed);
      Cam cam("c", small_config(causal));
      cam.register_params(s);
      std::mt19937_64 rng(seed);
      NDArray mask({2, 4}, 0.0);
      mask[7] = 1.0;
      NDArray w = random_array({2, 4, 8}, rng);
      auto loss = [&](Tape& t, const ParamStore& st, const std::vector<Var>& in) {
        CamOutput o = cam.forward(t, st, in[0], in[1], mask);
        return ops::sum(ops::mul(o.out, t.constant(w)));
      };
      GradCheckResult r =
          gradcheck(loss, s, {random_array({2, 4, 8}, rng), random_array({2, 5}, rng)});
      INFO("worst=" << r.worst << " rel=" << r.max_rel_error);
      CHECK(r.ok);
    }
  }
}
