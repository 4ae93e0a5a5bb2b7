#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "agn/ade.hpp"
#include "agn/batch.hpp"
#include "agn/domain.hpp"
#include "agn/features.hpp"
#include "agn/hse.hpp"
#include "agn/losses.hpp"
#include "agn/sample.hpp"

namespace agn {

struct ModelConfig {
  ActionVocab vocab = ActionVocab::short_video();
  FeatureSpec user_spec;
  FeatureSpec item_spec;
  std::size_t d_model = 16;
  std::size_t n_heads = 4;
  std::size_t mlp_hidden = 32;
  std::size_t gate_hidden = 16;
  std::size_t tower_hidden = 32;
  std::size_t history_len = 20;
  HseMode hse_mode = HseMode::kFull;
  bool use_cam = true;  // false: plain attention everywhere

  std::size_t d_user() const { return user_spec.total_dim(); }
  std::size_t d_item() const { return item_spec.total_dim(); }
  std::size_t d_ctx() const { return d_user() + d_item() + d_model; }
  void validate() const;
  std::uint64_t hash() const;
};

// HSE + ADE wired together. Parameter prefixes: feat.user.*, feat.item.*,
// hse.*, ade.*.
class Model {
 public:
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const noexcept { return cfg_; }
  const ActionVocab& vocab() const noexcept { return cfg_.vocab; }
  const Hse& hse() const noexcept { return hse_; }
  const Ade& ade() const noexcept { return ade_; }

  void register_params(ParamStore& store) const;
  ParamStore init_params(std::uint64_t seed) const;

  // F_context for every batch row: [n, d_ctx].
  Var context(Tape& tape, const ParamStore& store, const Batch& b) const;
  AdeSteps teacher_forced(Tape& tape, const ParamStore& store, const Batch& b, Var ctx) const;
  LossParts loss(Tape& tape, const ParamStore& store, const Batch& b, const LossWeights& w) const;

  NDArray context_values(const ParamStore& store, const Batch& b) const;
  std::vector<GeneratedSequence> generate(const ParamStore& store, const Batch& b) const;

 private:
  ModelConfig cfg_;
  Hse hse_;
  Ade ade_;
};

}  // namespace agn
