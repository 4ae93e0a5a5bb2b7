#include "agn/ade.hpp"

#include "agn/error.hpp"
#include "agn/ops.hpp"

namespace agn {

Var build_context(std::optional<Var> user, Var target, Var vec_hist, std::size_t expected_dim) {
  std::vector<Var> parts;
  if (user) parts.push_back(*user);
  parts.push_back(target);
  parts.push_back(vec_hist);
  Var c = ops::concat(parts);
  if (c.shape().back() != expected_dim)
    throw ShapeError("context dim " + std::to_string(c.shape().back()) + " != configured d_ctx " +
                     std::to_string(expected_dim));
  return c;
}

namespace {
CamConfig causal(CamConfig c) {
  c.causal = true;
  return c;
}
}  // namespace

Ade::Ade(const ActionVocab& vocab, AdeConfig cfg, std::string prefix)
    : vocab_(vocab),
      cfg_(cfg),
      prefix_(std::move(prefix)),
      tokens_(vocab, cfg.cam.d_model, prefix_ + ".tok"),
      cam_(prefix_ + ".cam", causal(cfg.cam)) {
  cfg_.cam.causal = true;
  if (cfg_.tower_hidden == 0) throw ValueError("tower_hidden must be >= 1");
  if (cfg_.cam.d_ctx == 0) throw ValueError("generator needs a context (d_ctx >= 1)");
}

void Ade::register_params(ParamStore& store) const {
  const std::size_t d = cfg_.cam.d_model, th = cfg_.tower_hidden;
  tokens_.register_params(store);
  store.add(path("ctx_proj.w"), {cfg_.cam.d_ctx, d}, Init::xavier());
  store.add(path("ctx_proj.b"), {d}, Init::zeros());
  cam_.register_params(store);
  store.add(path("cls.w1"), {d, th}, Init::xavier());
  store.add(path("cls.b1"), {th}, Init::zeros());
  store.add(path("cls.w2"), {th, vocab_.num_classes()}, Init::xavier());
  store.add(path("cls.b2"), {vocab_.num_classes()}, Init::zeros());
  store.add(path("time.w1"), {d, th}, Init::xavier());
  store.add(path("time.b1"), {th}, Init::zeros());
  store.add(path("time.w2"), {th, 1}, Init::xavier());
  store.add(path("time.b2"), {1}, Init::zeros());
}

AdeSteps Ade::forward(Tape& tape, const ParamStore& store, Var ctx,
                      std::span<const ActionId> prefix_actions,
                      std::span<const double> prefix_timings, std::size_t n,
                      std::size_t len) const {
  const std::size_t d = cfg_.cam.d_model, m = max_len();
  if (len >= m) throw ValueError("generator prefix length " + std::to_string(len) + " >= M");
  if (ctx.shape() != Shape{n, cfg_.cam.d_ctx})
    throw ShapeError("generator context " + shape_str(ctx.shape()) + ", expected " +
                     shape_str({n, cfg_.cam.d_ctx}));
  if (prefix_actions.size() != n * len || prefix_timings.size() != n * len)
    throw ShapeError("generator prefix must have n*len entries");
  const std::size_t l = len + 1;
  std::vector<ActionId> acts(n * l);
  std::vector<double> ts(n * l, 0.0);
  std::vector<std::size_t> pos(n * l);
  NDArray key_mask({n, l}, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    acts[r * l] = vocab_.bos();
    pos[r * l] = 0;
    for (std::size_t i = 0; i < len; ++i) {
      const ActionId a = prefix_actions[r * len + i];
      acts[r * l + i + 1] = a;
      ts[r * l + i + 1] = prefix_timings[r * len + i];
      pos[r * l + i + 1] = i + 1;
      if (a == vocab_.pad()) key_mask[r * l + i + 1] = 1.0;
    }
  }
  Var tok = tokens_.encode(tape, store, acts, ts, pos, n, l);
  Var cp = linear(tape, store, ctx, path("ctx_proj.w"), path("ctx_proj.b"));
  tok = ops::add(tok, ops::reshape(cp, {n, 1, d}));
  Var h = cam_.forward(tape, store, tok, ctx, key_mask).out;

  Var c = ops::relu(linear(tape, store, h, path("cls.w1"), path("cls.b1")));
  Var logits = linear(tape, store, c, path("cls.w2"), path("cls.b2"));
  Var t = ops::relu(linear(tape, store, h, path("time.w1"), path("time.b1")));
  t = ops::sigmoid(linear(tape, store, t, path("time.w2"), path("time.b2")));
  return {ops::log_softmax(logits), ops::softmax(logits), ops::reshape(t, {n, l})};
}

AdeSteps Ade::teacher_forced(Tape& tape, const ParamStore& store, Var ctx,
                             std::span<const ActionId> label_actions,
                             std::span<const double> label_timings, std::size_t n) const {
  const std::size_t m = max_len();
  if (label_actions.size() != n * m || label_timings.size() != n * m)
    throw ShapeError("labels must have n*M entries");
  std::vector<ActionId> acts(n * (m - 1));
  std::vector<double> ts(n * (m - 1));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i + 1 < m; ++i) {
      acts[r * (m - 1) + i] = label_actions[r * m + i];
      ts[r * (m - 1) + i] = label_timings[r * m + i];
    }
  return forward(tape, store, ctx, acts, ts, n, m - 1);
}

namespace {

GenStep step_at(const AdeSteps& s, std::size_t row, std::size_t pos) {
  const NDArray& p = s.probs.value();
  const std::size_t l = p.dim(1), c = p.dim(2);
  GenStep g;
  g.class_probs.assign(p.raw().begin() + static_cast<std::ptrdiff_t>((row * l + pos) * c),
                       p.raw().begin() + static_cast<std::ptrdiff_t>((row * l + pos + 1) * c));
  g.timing_pred = s.timing.value()[row * l + pos];
  return g;
}

}  // namespace

std::vector<GeneratedSequence> Ade::generate(const ParamStore& store, const NDArray& ctx) const {
  if (ctx.rank() != 2 || ctx.dim(1) != cfg_.cam.d_ctx)
    throw ShapeError("generator context " + shape_str(ctx.shape()));
  const std::size_t n = ctx.dim(0), m = max_len(), dc = cfg_.cam.d_ctx;
  const ActionId pad = vocab_.pad();
  std::vector<GeneratedSequence> out(n);
  std::vector<std::size_t> active(n);
  for (std::size_t r = 0; r < n; ++r) active[r] = r;

  for (std::size_t i = 0; i < m && !active.empty(); ++i) {
    const std::size_t na = active.size();
    NDArray sub({na, dc});
    std::vector<ActionId> acts;
    std::vector<double> ts;
    for (std::size_t k = 0; k < na; ++k) {
      const std::size_t r = active[k];
      std::copy(ctx.raw().begin() + static_cast<std::ptrdiff_t>(r * dc),
                ctx.raw().begin() + static_cast<std::ptrdiff_t>((r + 1) * dc),
                sub.raw().begin() + static_cast<std::ptrdiff_t>(k * dc));
      for (const ActionEvent& e : out[r].decoded.events) {
        acts.push_back(e.action);
        ts.push_back(e.timing_norm);
      }
    }
    Tape tape(false);
    AdeSteps s = forward(tape, store, tape.constant(std::move(sub)), acts, ts, na, i);

    std::vector<std::size_t> still;
    for (std::size_t k = 0; k < na; ++k) {
      const std::size_t r = active[k];
      GeneratedSequence& gs = out[r];
      GenStep g = step_at(s, k, i);
      std::vector<bool> allowed(vocab_.num_classes(), true);
      for (const ActionEvent& e : gs.decoded.events) allowed[e.action] = false;
      if (vocab_.start()) {
        if (i == 0) {
          allowed.assign(allowed.size(), false);
          allowed[*vocab_.start()] = true;
        } else {
          allowed[*vocab_.start()] = false;
        }
      }
      if (vocab_.leave() || i == 0) allowed[pad] = false;
      std::size_t best = pad;
      double best_p = -1.0;
      for (std::size_t c = 0; c < allowed.size(); ++c)
        if (allowed[c] && g.class_probs[c] > best_p) {
          best_p = g.class_probs[c];
          best = c;
        }
      gs.steps.push_back(g);
      if (best == pad) continue;
      const bool is_start = vocab_.start() && best == *vocab_.start();
      gs.decoded.events.push_back({best, is_start ? 0.0 : g.timing_pred, std::nullopt});
      if (vocab_.leave() && best == *vocab_.leave()) continue;
      still.push_back(r);
    }
    active.swap(still);
  }
  return out;
}

std::vector<GenStep> Ade::incremental_steps(const ParamStore& store, const NDArray& ctx_row,
                                            const ActionSequence& label) const {
  const std::size_t m = max_len(), dc = cfg_.cam.d_ctx;
  if (ctx_row.size() != dc) throw ShapeError("context row " + shape_str(ctx_row.shape()));
  const std::size_t steps = std::min(label.events.size() + 1, m);
  std::vector<GenStep> out;
  std::vector<ActionId> acts;
  std::vector<double> ts;
  for (std::size_t i = 0; i < steps; ++i) {
    Tape tape(false);
    AdeSteps s = forward(tape, store, tape.constant(ctx_row.reshaped({1, dc})), acts, ts, 1, i);
    out.push_back(step_at(s, 0, i));
    if (i < label.events.size()) {
      acts.push_back(label.events[i].action);
      ts.push_back(label.events[i].timing_norm);
    }
  }
  return out;
}

double action_probability(std::span<const GenStep> steps, ActionId action, const ActionVocab& vocab) {
  if (action >= vocab.num_actions()) throw ValueError("unknown action id " + std::to_string(action));
  if (steps.empty()) throw ValueError("action_probability needs at least one step");
  double best = 0.0;
  for (const GenStep& g : steps) best = std::max(best, g.class_probs.at(action));
  return best;
}

double action_timing_estimate(std::span<const GenStep> steps, ActionId action, bool normalized,
                              const ActionVocab& vocab) {
  if (action >= vocab.num_actions()) throw ValueError("unknown action id " + std::to_string(action));
  if (steps.empty()) throw ValueError("action_timing_estimate needs at least one step");
  double num = 0.0, den = 0.0;
  for (const GenStep& g : steps) {
    num += g.class_probs.at(action) * g.timing_pred;
    den += g.class_probs.at(action);
  }
  if (!normalized) return num;
  if (den == 0.0) throw ValueError("timing estimate undefined: zero total probability");
  return num / den;
}

}  // namespace agn
