#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "agn/evaluator.hpp"
#include "agn/kvconfig.hpp"
#include "agn/losses.hpp"
#include "agn/model.hpp"
#include "agn/optim.hpp"

namespace agn {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 0;  // when > 0, overrides max_steps with epochs * batches per epoch
  std::size_t max_steps = 1000;
  std::uint64_t seed = 1;
  LossWeights weights;
  AdamConfig adam;
  double clip_norm = 5.0;
  std::size_t eval_every = 0;  // 0: evaluate only at the end
  std::size_t eval_batch = 256;

  // ablation flags
  HseMode hse_mode = HseMode::kFull;
  bool use_cam = true;
  bool use_order_loss = true;

  // model dims
  std::size_t d_model = 16;
  std::size_t n_heads = 4;
  std::size_t mlp_hidden = 32;
  std::size_t gate_hidden = 16;
  std::size_t tower_hidden = 32;
  std::size_t history_len = 20;

  void validate() const;
  LossWeights effective_weights() const;
  std::size_t total_steps(std::size_t n_samples) const;

  // Keys are the field names, plus alpha/beta/gamma, lr/beta1/beta2/eps and
  // hse_mode (full | no_action_seq | sum_pool).
  static TrainConfig from_kv(const KvConfig& kv, TrainConfig base);
  static TrainConfig from_kv(const KvConfig& kv) { return from_kv(kv, TrainConfig()); }
  KvConfig to_kv() const;
};

// Model wiring honoring the ablation flags.
ModelConfig assemble_model(const TrainConfig& cfg, const ActionVocab& vocab, const FeatureSpec& user_spec,
                           const FeatureSpec& item_spec);

// Sample order for one epoch: a Fisher-Yates permutation seeded from (seed, epoch).
std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n);
// Sample indices of global step `step` (0-based). Batches never straddle epochs;
// the last batch of an epoch may be short.
std::vector<std::size_t> step_batch(std::uint64_t seed, std::size_t step, std::size_t n, std::size_t batch_size);

struct EvalPoint {
  std::size_t step = 0;
  std::optional<LossValues> train;  // mean over the steps since the previous point
  std::optional<LossValues> heldout;
  std::vector<ActionMetrics> actions;  // held-out, free-running
};

struct TrainReport {
  std::size_t steps = 0;        // steps taken by this run
  std::size_t final_step = 0;   // global step counter at the end
  std::vector<double> loss_curve;  // total loss per step
  std::vector<EvalPoint> evals;
  double wall_time_sec = 0.0;
};

// Deterministic part of the report only; wall time goes to its own record so two
// identical runs serialize identically.
nlohmann::ordered_json to_json(const TrainReport& r);

struct TrainOptions {
  std::optional<std::string> checkpoint;  // written at eval points and at the end
  std::span<const Sample> heldout;        // empty: no held-out metrics
  std::size_t jobs = 1;                   // held-out evaluation threads
  std::function<void(const EvalPoint&)> on_eval;
};

// Trains in place. `store` may come from a checkpoint (its step counter and Adam
// moments are honored, so resuming continues the identical run).
TrainReport train(const Model& model, ParamStore& store, std::span<const Sample> samples,
                  const TrainConfig& cfg, const TrainOptions& opts = {});

}  // namespace agn
