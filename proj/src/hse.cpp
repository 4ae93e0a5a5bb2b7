#include "agn/hse.hpp"

#include "agn/error.hpp"
#include "agn/ops.hpp"

namespace agn {

const char* hse_mode_name(HseMode m) {
  switch (m) {
    case HseMode::kFull: return "full";
    case HseMode::kNoActionSeq: return "no_action_seq";
    case HseMode::kSumPool: return "sum_pool";
  }
  return "?";
}

HseMode parse_hse_mode(const std::string& s) {
  if (s == "full") return HseMode::kFull;
  if (s == "no_action_seq") return HseMode::kNoActionSeq;
  if (s == "sum_pool") return HseMode::kSumPool;
  throw ValueError("unknown history mode '" + s + "' (full, no_action_seq, sum_pool)");
}

Hse::Hse(const ActionVocab& vocab, std::size_t d_item, HseConfig cfg, std::string prefix)
    : prefix_(std::move(prefix)),
      cfg_(cfg),
      d_item_(d_item),
      d_model_(cfg.action_cam.d_model),
      tokens_(vocab, cfg.action_cam.d_model, prefix_ + ".tok"),
      action_cam_(prefix_ + ".action", cfg.action_cam),
      item_cam_(prefix_ + ".item", cfg.item_cam) {
  if (cfg_.history_len == 0) throw ValueError("history_len must be >= 1");
  if (d_item_ == 0) throw ValueError("history encoder needs item features");
  if (cfg_.item_cam.d_model != d_model_) throw ValueError("history attention widths differ");
}

void Hse::register_params(ParamStore& store) const {
  tokens_.register_params(store);
  store.add(path("no_history"), {d_model_}, Init::uniform(0.1));
  if (cfg_.mode == HseMode::kSumPool) {
    store.add(path("sum_proj.w"), {d_item_ + d_model_, d_model_}, Init::xavier());
    store.add(path("sum_proj.b"), {d_model_}, Init::zeros());
    return;
  }
  if (cfg_.mode == HseMode::kFull) action_cam_.register_params(store);
  store.add(path("proj.w"), {d_model_ + d_item_, d_model_}, Init::xavier());
  store.add(path("proj.b"), {d_model_}, Init::zeros());
  store.add(path("recency"), {cfg_.history_len, d_model_}, Init::uniform(0.1));
  item_cam_.register_params(store);
}

Var Hse::encode_action_dim(Tape& tape, const ParamStore& store, const Batch& b,
                           Var hist_items) const {
  if (cfg_.mode != HseMode::kFull) return action_sum(tape, store, b);
  const std::size_t rows = b.n * b.hist_len;
  Var tok = tokens_.encode(tape, store, b.hist_actions, b.hist_timings, b.hist_positions, rows,
                           b.hist_seq_len);
  CamOutput o = action_cam_.forward(tape, store, tok, hist_items, b.hist_action_mask);
  return masked_mean(o.out, b.hist_action_mask);
}

Var Hse::action_sum(Tape& tape, const ParamStore& store, const Batch& b) const {
  const std::size_t rows = b.n * b.hist_len, sl = b.hist_seq_len;
  std::vector<std::size_t> ids(b.hist_actions.begin(), b.hist_actions.end());
  Var e = ops::reshape(ops::embedding(tape.param(store, tokens_.action_table()), ids),
                       {rows, sl, d_model_});
  NDArray keep({rows, sl, 1});
  for (std::size_t i = 0; i < rows * sl; ++i) keep[i] = 1.0 - b.hist_action_mask[i];
  return ops::sum_axis(ops::mul(e, tape.constant(std::move(keep))), 1, false);
}

Var Hse::with_fallback(Tape& tape, const ParamStore& store, const Batch& b, Var pooled) const {
  NDArray has({b.n, 1}), none({b.n, 1});
  for (std::size_t r = 0; r < b.n; ++r) {
    has[r] = b.hist_count[r] > 0 ? 1.0 : 0.0;
    none[r] = 1.0 - has[r];
  }
  return ops::add(ops::mul(pooled, tape.constant(std::move(has))),
                  ops::mul(tape.constant(std::move(none)), tape.param(store, path("no_history"))));
}

Var Hse::encode(Tape& tape, const ParamStore& store, const Batch& b, Var hist_items,
                Var target) const {
  const std::size_t rows = b.n * b.hist_len;
  if (hist_items.shape() != Shape{rows, d_item_})
    throw ShapeError("history item features " + shape_str(hist_items.shape()) + ", expected " +
                     shape_str({rows, d_item_}));
  if (cfg_.mode == HseMode::kSumPool) {
    Var x = ops::concat({hist_items, action_sum(tape, store, b)});
    NDArray keep({b.n, b.hist_len, 1});
    for (std::size_t i = 0; i < rows; ++i) keep[i] = 1.0 - b.hist_item_mask[i];
    Var s = ops::sum_axis(
        ops::mul(ops::reshape(x, {b.n, b.hist_len, d_item_ + d_model_}), tape.constant(std::move(keep))),
        1, false);
    return with_fallback(tape, store, b, linear(tape, store, s, path("sum_proj.w"), path("sum_proj.b")));
  }
  for (std::size_t r : b.hist_recency)
    if (r >= cfg_.history_len) throw ValueError("history longer than history_len");
  Var seq_j = encode_action_dim(tape, store, b, hist_items);
  Var e = linear(tape, store, ops::concat({seq_j, hist_items}), path("proj.w"), path("proj.b"));
  e = ops::add(e, ops::embedding(tape.param(store, path("recency")), b.hist_recency));
  e = ops::reshape(e, {b.n, b.hist_len, d_model_});
  CamOutput o = item_cam_.forward(tape, store, e, target, b.hist_item_mask);
  return with_fallback(tape, store, b, masked_mean(o.out, b.hist_item_mask));
}

}  // namespace agn
