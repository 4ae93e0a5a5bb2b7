#include "agn/model.hpp"

#include "agn/error.hpp"
#include "agn/hash.hpp"

namespace agn {

namespace {

CamConfig cam_config(const ModelConfig& c, std::size_t d_ctx) {
  CamConfig k;
  k.d_model = c.d_model;
  k.n_heads = c.n_heads;
  k.d_ctx = d_ctx;
  k.mlp_hidden = c.mlp_hidden;
  k.gate_hidden = c.gate_hidden;
  k.context_aware = c.use_cam;
  return k;
}

HseConfig hse_config(const ModelConfig& c) {
  HseConfig h;
  h.history_len = c.history_len;
  h.mode = c.hse_mode;
  h.action_cam = cam_config(c, c.d_item());
  h.item_cam = cam_config(c, c.d_item());
  return h;
}

AdeConfig ade_config(const ModelConfig& c) {
  AdeConfig a;
  a.cam = cam_config(c, c.d_ctx());
  a.cam.causal = true;
  a.tower_hidden = c.tower_hidden;
  return a;
}

const ModelConfig& validated(const ModelConfig& c) {
  c.validate();
  return c;
}

}  // namespace

void ModelConfig::validate() const {
  if (item_spec.fields().empty()) throw ConfigError("item_spec", "item features are required");
  if (history_len == 0) throw ConfigError("history_len", "must be >= 1");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
    throw ConfigError("n_heads", "d_model must be a positive multiple of n_heads");
  if (mlp_hidden == 0 || gate_hidden == 0 || tower_hidden == 0)
    throw ConfigError("mlp_hidden", "hidden widths must be >= 1");
}

std::uint64_t ModelConfig::hash() const {
  std::uint64_t h = vocab.hash();
  auto mix = [&](std::uint64_t v) { h = splitmix64(h ^ v); };
  mix(user_spec.hash());
  mix(item_spec.hash());
  for (std::size_t v : {d_model, n_heads, mlp_hidden, gate_hidden, tower_hidden, history_len})
    mix(v);
  mix(static_cast<std::uint64_t>(hse_mode));
  mix(use_cam ? 1 : 0);
  return h;
}

Model::Model(ModelConfig cfg)
    : cfg_(validated(cfg)),
      hse_(cfg_.vocab, cfg_.d_item(), hse_config(cfg_)),
      ade_(cfg_.vocab, ade_config(cfg_)) {}

void Model::register_params(ParamStore& store) const {
  register_feature_params(store, cfg_.user_spec, "feat.user");
  register_feature_params(store, cfg_.item_spec, "feat.item");
  hse_.register_params(store);
  ade_.register_params(store);
}

ParamStore Model::init_params(std::uint64_t seed) const {
  ParamStore s(seed);
  register_params(s);
  return s;
}

Var Model::context(Tape& tape, const ParamStore& store, const Batch& b) const {
  Var hist = encode_features(tape, store, cfg_.item_spec, "feat.item", b.hist_item);
  Var target = encode_features(tape, store, cfg_.item_spec, "feat.item", b.target_item);
  Var vec = hse_.encode(tape, store, b, hist, target);
  std::optional<Var> user;
  if (cfg_.d_user() > 0) user = encode_features(tape, store, cfg_.user_spec, "feat.user", b.user);
  return build_context(user, target, vec, cfg_.d_ctx());
}

AdeSteps Model::teacher_forced(Tape& tape, const ParamStore& store, const Batch& b, Var ctx) const {
  return ade_.teacher_forced(tape, store, ctx, b.label_actions, b.label_timings, b.n);
}

LossParts Model::loss(Tape& tape, const ParamStore& store, const Batch& b,
                      const LossWeights& w) const {
  AdeSteps s = teacher_forced(tape, store, b, context(tape, store, b));
  return combined_loss(s.log_probs, s.timing, b.label_actions, b.label_timings, b.label_len, w);
}

NDArray Model::context_values(const ParamStore& store, const Batch& b) const {
  Tape tape(false);
  return context(tape, store, b).value();
}

std::vector<GeneratedSequence> Model::generate(const ParamStore& store, const Batch& b) const {
  return ade_.generate(store, context_values(store, b));
}

}  // namespace agn
