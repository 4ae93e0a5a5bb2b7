#include "agn/cam.hpp"

#include <cmath>

#include "agn/error.hpp"
#include "agn/ops.hpp"

namespace agn {

void CamConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || mlp_hidden == 0 || gate_hidden == 0)
    throw ValueError("attention block dimensions must be >= 1");
  if (d_model % n_heads != 0)
    throw ValueError("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                     std::to_string(n_heads));
  if (context_aware && d_ctx == 0) throw ValueError("context-aware block needs d_ctx >= 1");
}

Cam::Cam(std::string prefix, CamConfig cfg) : prefix_(std::move(prefix)), cfg_(cfg) {
  cfg_.validate();
}

void Cam::register_params(ParamStore& store) const {
  const std::size_t d = cfg_.d_model, dh = cfg_.d_head();
  const std::size_t q_in = cfg_.context_aware ? d + cfg_.d_ctx : d;
  for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
    store.add(head_path(h, "wq"), {q_in, dh}, Init::xavier());
    store.add(head_path(h, "wk"), {d, dh}, Init::xavier());
    store.add(head_path(h, "wv"), {d, d}, Init::xavier());
  }
  if (cfg_.context_aware) {
    store.add(path("gate.w1"), {cfg_.d_ctx, cfg_.gate_hidden}, Init::xavier());
    store.add(path("gate.b1"), {cfg_.gate_hidden}, Init::zeros());
    store.add(path("gate.w2"), {cfg_.gate_hidden, cfg_.n_heads}, Init::xavier());
    store.add(path("gate.b2"), {cfg_.n_heads}, Init::zeros());
  }
  store.add(path("ffn.w1"), {d, cfg_.mlp_hidden}, Init::xavier());
  store.add(path("ffn.b1"), {cfg_.mlp_hidden}, Init::zeros());
  store.add(path("ffn.w2"), {cfg_.mlp_hidden, d}, Init::xavier());
  store.add(path("ffn.b2"), {d}, Init::zeros());
  for (const char* ln : {"ln1", "ln2"}) {
    store.add(path(std::string(ln) + ".gain"), {d}, Init::ones());
    store.add(path(std::string(ln) + ".bias"), {d}, Init::zeros());
  }
}

Var linear(Tape& tape, const ParamStore& store, Var x, const std::string& weight,
           const std::string& bias) {
  return ops::add(ops::matmul(x, tape.param(store, weight)), tape.param(store, bias));
}

Var affine_layer_norm(Tape& tape, const ParamStore& store, Var x, const std::string& prefix) {
  return ops::add(ops::mul(ops::layer_norm(x), tape.param(store, prefix + ".gain")),
                  tape.param(store, prefix + ".bias"));
}

CamOutput Cam::forward(Tape& tape, const ParamStore& store, Var seq, std::optional<Var> ctx,
                       const NDArray& key_mask, const std::optional<NDArray>& gate_override) const {
  const Shape& s = seq.shape();
  if (s.size() != 3 || s[2] != cfg_.d_model)
    throw ShapeError(prefix_ + ": sequence must be [N, L, " + std::to_string(cfg_.d_model) +
                     "], got " + shape_str(s));
  const std::size_t n = s[0], len = s[1], d = cfg_.d_model, dh = cfg_.d_head();
  if (key_mask.shape() != Shape{n, len})
    throw ShapeError(prefix_ + ": key mask " + shape_str(key_mask.shape()) + " vs sequence " +
                     shape_str(s));
  if (cfg_.context_aware) {
    if (!ctx) throw ValueError(prefix_ + ": context-aware block requires a context");
    if (ctx->shape() != Shape{n, cfg_.d_ctx})
      throw ShapeError(prefix_ + ": context must be [" + std::to_string(n) + "," +
                       std::to_string(cfg_.d_ctx) + "], got " + shape_str(ctx->shape()));
  }

  // mask[i][j] = 1 when query i may not see key j
  NDArray mask({n, len, len}, 0.0);
  NDArray row_valid({n, len, 1}, 1.0);
  bool any_empty_row = false;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < len; ++i) {
      bool visible = false;
      for (std::size_t j = 0; j < len; ++j) {
        const bool hidden = key_mask[b * len + j] != 0.0 || (cfg_.causal && j > i);
        mask[(b * len + i) * len + j] = hidden ? 1.0 : 0.0;
        visible = visible || !hidden;
      }
      if (!visible) {
        row_valid[b * len + i] = 0.0;
        any_empty_row = true;
      }
    }
  }
  Var row_valid_v = tape.constant(std::move(row_valid));

  CamOutput res;
  if (gate_override) {
    res.gate = tape.constant(*gate_override);
  } else if (cfg_.context_aware) {
    Var hdn = ops::relu(linear(tape, store, *ctx, path("gate.w1"), path("gate.b1")));
    res.gate = ops::softmax(linear(tape, store, hdn, path("gate.w2"), path("gate.b2")));
  } else {
    res.gate = tape.constant(NDArray({1, cfg_.n_heads}, 1.0 / static_cast<double>(cfg_.n_heads)));
  }
  const Shape& gs = res.gate.shape();
  if (gs.size() != 2 || gs[1] != cfg_.n_heads || (gs[0] != n && gs[0] != 1))
    throw ShapeError(prefix_ + ": gate must be [N or 1, n_heads], got " + shape_str(gs));

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::optional<Var> attn;
  for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
    Var wq = tape.param(store, head_path(h, "wq"));
    Var q;
    if (cfg_.context_aware) {
      q = ops::matmul(seq, ops::slice(wq, 0, 0, d));
      Var qc = ops::matmul(*ctx, ops::slice(wq, 0, d, d + cfg_.d_ctx));
      q = ops::add(q, ops::reshape(qc, {n, 1, dh}));
    } else {
      q = ops::matmul(seq, wq);
    }
    Var k = ops::matmul(seq, tape.param(store, head_path(h, "wk")));
    Var v = ops::matmul(seq, tape.param(store, head_path(h, "wv")));
    Var scores = ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt);
    Var a = ops::softmax(ops::masked_fill(scores, mask, ops::kMaskValue));
    if (any_empty_row) a = ops::mul(a, row_valid_v);
    res.attention.push_back(a);
    Var head = ops::matmul(a, v);
    Var g = ops::reshape(ops::slice(res.gate, 1, h, h + 1), {gs[0], 1, 1});
    Var weighted = ops::mul(head, g);
    attn = attn ? ops::add(*attn, weighted) : weighted;
  }

  Var x = affine_layer_norm(tape, store, ops::add(seq, *attn), path("ln1"));
  Var f = ops::relu(linear(tape, store, x, path("ffn.w1"), path("ffn.b1")));
  f = linear(tape, store, f, path("ffn.w2"), path("ffn.b2"));
  res.out = affine_layer_norm(tape, store, ops::add(x, f), path("ln2"));
  return res;
}

namespace {

Var pooled_mean(Var seq, const NDArray& key_mask, bool allow_empty) {
  const Shape& s = seq.shape();
  if (s.size() != 3 || key_mask.shape() != Shape{s[0], s[1]})
    throw ShapeError("pool: sequence " + shape_str(s) + " vs mask " + shape_str(key_mask.shape()));
  const std::size_t n = s[0], len = s[1];
  NDArray w({n, len, 1}, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < len; ++j) count += key_mask[b * len + j] == 0.0;
    if (count == 0) {
      if (!allow_empty) throw ValueError("pool: every position is masked");
      continue;
    }
    for (std::size_t j = 0; j < len; ++j)
      if (key_mask[b * len + j] == 0.0) w[b * len + j] = 1.0 / static_cast<double>(count);
  }
  return ops::sum_axis(ops::mul(seq, seq.tape->constant(std::move(w))), 1, false);
}

}  // namespace

Var cam_pool(Var seq_out, const NDArray& key_mask) { return pooled_mean(seq_out, key_mask, false); }
Var masked_mean(Var seq, const NDArray& key_mask) { return pooled_mean(seq, key_mask, true); }

}  // namespace agn
