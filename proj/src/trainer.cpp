#include "agn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "agn/batch.hpp"
#include "agn/checkpoint.hpp"
#include "agn/error.hpp"
#include "agn/hash.hpp"

namespace agn {

namespace {

using Json = nlohmann::ordered_json;

std::string num(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

std::string describe(const LossValues& l) {
  return "L_cls=" + num(l.cls) + " L_reg=" + num(l.reg) + " L_order=" + num(l.order) + " total=" + num(l.total);
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size", "batch_size must be >= 1");
  if (!(clip_norm > 0) || !std::isfinite(clip_norm)) throw ConfigError("clip_norm", "clip_norm must be > 0");
  if (eval_batch == 0) throw ConfigError("eval_batch", "eval_batch must be >= 1");
  if (!(adam.lr > 0) || !std::isfinite(adam.lr)) throw ConfigError("lr", "lr must be > 0");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1)) throw ConfigError("beta1", "beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0 && adam.beta2 < 1)) throw ConfigError("beta2", "beta2 must lie in [0, 1)");
  if (!(adam.eps > 0)) throw ConfigError("eps", "eps must be > 0");
  try {
    weights.validate();
  } catch (const ValueError& e) {
    throw ConfigError("alpha", e.what());
  }
}

LossWeights TrainConfig::effective_weights() const {
  LossWeights w = weights;
  if (!use_order_loss) w.gamma = 0.0;
  return w;
}

std::size_t TrainConfig::total_steps(std::size_t n_samples) const {
  if (epochs == 0) return max_steps;
  return epochs * ((n_samples + batch_size - 1) / batch_size);
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv, TrainConfig c) {
  kv.read("batch_size", c.batch_size);
  kv.read("epochs", c.epochs);
  kv.read("max_steps", c.max_steps);
  kv.read("seed", c.seed);
  kv.read("alpha", c.weights.alpha);
  kv.read("beta", c.weights.beta);
  kv.read("gamma", c.weights.gamma);
  kv.read("lr", c.adam.lr);
  kv.read("beta1", c.adam.beta1);
  kv.read("beta2", c.adam.beta2);
  kv.read("eps", c.adam.eps);
  kv.read("clip_norm", c.clip_norm);
  kv.read("eval_every", c.eval_every);
  kv.read("eval_batch", c.eval_batch);
  if (auto m = kv.str("hse_mode")) {
    try {
      c.hse_mode = parse_hse_mode(*m);
    } catch (const ValueError& e) {
      throw ConfigError("hse_mode", e.what());
    }
  }
  kv.read("use_cam", c.use_cam);
  kv.read("use_order_loss", c.use_order_loss);
  kv.read("d_model", c.d_model);
  kv.read("n_heads", c.n_heads);
  kv.read("mlp_hidden", c.mlp_hidden);
  kv.read("gate_hidden", c.gate_hidden);
  kv.read("tower_hidden", c.tower_hidden);
  kv.read("history_len", c.history_len);
  kv.reject_unknown();
  c.validate();
  return c;
}

KvConfig TrainConfig::to_kv() const {
  KvConfig kv;
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("epochs", std::to_string(epochs));
  kv.set("max_steps", std::to_string(max_steps));
  kv.set("seed", std::to_string(seed));
  kv.set("alpha", num(weights.alpha));
  kv.set("beta", num(weights.beta));
  kv.set("gamma", num(weights.gamma));
  kv.set("lr", num(adam.lr));
  kv.set("beta1", num(adam.beta1));
  kv.set("beta2", num(adam.beta2));
  kv.set("eps", num(adam.eps));
  kv.set("clip_norm", num(clip_norm));
  kv.set("eval_every", std::to_string(eval_every));
  kv.set("eval_batch", std::to_string(eval_batch));
  kv.set("hse_mode", hse_mode_name(hse_mode));
  kv.set("use_cam", use_cam ? "true" : "false");
  kv.set("use_order_loss", use_order_loss ? "true" : "false");
  kv.set("d_model", std::to_string(d_model));
  kv.set("n_heads", std::to_string(n_heads));
  kv.set("mlp_hidden", std::to_string(mlp_hidden));
  kv.set("gate_hidden", std::to_string(gate_hidden));
  kv.set("tower_hidden", std::to_string(tower_hidden));
  kv.set("history_len", std::to_string(history_len));
  return kv;
}

ModelConfig assemble_model(const TrainConfig& cfg, const ActionVocab& vocab, const FeatureSpec& user_spec,
                           const FeatureSpec& item_spec) {
  ModelConfig m;
  m.vocab = vocab;
  m.user_spec = user_spec;
  m.item_spec = item_spec;
  m.d_model = cfg.d_model;
  m.n_heads = cfg.n_heads;
  m.mlp_hidden = cfg.mlp_hidden;
  m.gate_hidden = cfg.gate_hidden;
  m.tower_hidden = cfg.tower_hidden;
  m.history_len = cfg.history_len;
  m.hse_mode = cfg.hse_mode;
  m.use_cam = cfg.use_cam;
  m.validate();
  return m;
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(derive_seed(seed, "epoch:" + std::to_string(epoch)));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  return order;
}

std::vector<std::size_t> step_batch(std::uint64_t seed, std::size_t step, std::size_t n, std::size_t batch_size) {
  if (n == 0 || batch_size == 0) throw ValueError("step_batch needs n >= 1 and batch_size >= 1");
  const std::size_t per_epoch = (n + batch_size - 1) / batch_size;
  const std::vector<std::size_t> order = epoch_order(seed, step / per_epoch, n);
  const std::size_t lo = (step % per_epoch) * batch_size, hi = std::min(n, lo + batch_size);
  return {order.begin() + lo, order.begin() + hi};
}

Json to_json(const TrainReport& r) {
  Json evals = Json::array();
  for (const EvalPoint& e : r.evals) {
    Json a = Json::array();
    for (const ActionMetrics& m : e.actions) a.push_back(to_json(m));
    evals.push_back(Json{{"step", e.step},
                         {"train", e.train ? to_json(*e.train) : Json(nullptr)},
                         {"heldout", e.heldout ? to_json(*e.heldout) : Json(nullptr)},
                         {"actions", a}});
  }
  return Json{{"steps", r.steps}, {"final_step", r.final_step}, {"loss_curve", r.loss_curve}, {"evals", evals}};
}

TrainReport train(const Model& model, ParamStore& store, std::span<const Sample> samples,
                  const TrainConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  if (samples.empty()) throw ValueError("training needs at least one sample");
  const auto t0 = std::chrono::steady_clock::now();
  const LossWeights w = cfg.effective_weights();
  const std::size_t n = samples.size();
  const std::size_t total = cfg.total_steps(n);
  const std::size_t start = static_cast<std::size_t>(std::max<std::int64_t>(0, store.step()));
  const std::uint64_t hash = model.config().hash();

  TrainReport rep;
  LossValues acc;
  std::size_t acc_n = 0;

  auto eval_point = [&](std::size_t step) {
    EvalPoint e;
    e.step = step;
    if (acc_n) {
      const double k = static_cast<double>(acc_n);
      e.train = LossValues{acc.cls / k, acc.reg / k, acc.order / k, acc.total / k};
    }
    acc = {};
    acc_n = 0;
    if (!opts.heldout.empty()) {
      // read-only snapshot: evaluation gets a const view of the parameters
      const ParamStore& snap = store;
      e.heldout = eval_losses(model, snap, opts.heldout, w, cfg.eval_batch);
      EvalOptions eo;
      eo.batch_size = cfg.eval_batch;
      eo.jobs = opts.jobs;
      const Predictions p = predict(model, snap, opts.heldout, eo);
      e.actions = action_metrics(opts.heldout, p.steps, model.vocab());
    }
    if (opts.checkpoint) save_checkpoint(*opts.checkpoint, store, hash, true);
    if (opts.on_eval) opts.on_eval(e);
    rep.evals.push_back(std::move(e));
  };

  for (std::size_t s = start; s < total; ++s) {
    const std::vector<std::size_t> idx = step_batch(cfg.seed, s, n, cfg.batch_size);
    std::vector<const Sample*> rows;
    for (std::size_t i : idx) rows.push_back(&samples[i]);
    const Batch b = make_batch(rows, model.vocab(), model.config().history_len);

    Tape tape;
    LossValues lv;
    try {
      const LossParts parts = model.loss(tape, store, b, w);
      lv = {parts.cls.value().item(), parts.reg.value().item(), parts.order.value().item(),
            parts.total.value().item()};
      if (!std::isfinite(lv.total) || !std::isfinite(lv.cls) || !std::isfinite(lv.reg) || !std::isfinite(lv.order))
        throw TrainError(s, "non-finite loss at step " + std::to_string(s) + ": " + describe(lv));
      tape.backward(parts.total, store);
    } catch (const TrainError&) {
      throw;
    } catch (const ValueError& e) {
      throw TrainError(s, "non-finite value at step " + std::to_string(s) + " (" + e.what() +
                              "); component losses unavailable");
    }
    const double norm = clip_grad_norm(store, cfg.clip_norm);
    if (!std::isfinite(norm)) {
      store.zero_grad();
      throw TrainError(s, "non-finite gradient norm at step " + std::to_string(s) + ": " + describe(lv));
    }
    adam_step(store, cfg.adam);

    rep.loss_curve.push_back(lv.total);
    acc.cls += lv.cls;
    acc.reg += lv.reg;
    acc.order += lv.order;
    acc.total += lv.total;
    ++acc_n;
    ++rep.steps;
    if (cfg.eval_every && (s + 1) % cfg.eval_every == 0 && s + 1 != total) eval_point(s + 1);
  }
  eval_point(std::max(start, total));
  rep.final_step = static_cast<std::size_t>(store.step());
  rep.wall_time_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace agn
