#pragma once

#include <string>

#include "agn/batch.hpp"
#include "agn/cam.hpp"
#include "agn/domain.hpp"
#include "agn/param_store.hpp"
#include "agn/tape.hpp"
#include "agn/tokens.hpp"

namespace agn {

enum class HseMode { kFull, kNoActionSeq, kSumPool };

const char* hse_mode_name(HseMode m);
HseMode parse_hse_mode(const std::string& s);

struct HseConfig {
  std::size_t history_len = 20;
  HseMode mode = HseMode::kFull;
  CamConfig action_cam;  // d_ctx = item feature dim
  CamConfig item_cam;    // d_ctx = item feature dim
};

// Two-level history encoder.
//   Seq_j    = pool(CAM_action(tokens of item j's actions, ctx = F_item_j))
//   e_j      = W_p [Seq_j || F_item_j] + b_p + recency_embedding[j]
//   Vec_hist = pool(CAM_item(e, ctx = F_target))
// Rows with no history get the learned no-history vector.
// no_action_seq replaces Seq_j by the sum of its action embeddings; sum_pool
// bypasses both attention levels: Vec_hist = W_s sum_j [F_item_j || sum of action
// embeddings of j] + b_s.
class Hse {
 public:
  Hse(const ActionVocab& vocab, std::size_t d_item, HseConfig cfg, std::string prefix = "hse");

  void register_params(ParamStore& store) const;
  const HseConfig& config() const noexcept { return cfg_; }

  // hist_items: [n * hist_len, d_item]; target: [n, d_item]. Returns [n, d_model].
  Var encode(Tape& tape, const ParamStore& store, const Batch& batch, Var hist_items,
             Var target) const;
  // Per-history-item action representation [n * hist_len, d_model].
  Var encode_action_dim(Tape& tape, const ParamStore& store, const Batch& batch,
                        Var hist_items) const;

 private:
  Var action_sum(Tape& tape, const ParamStore& store, const Batch& batch) const;
  Var with_fallback(Tape& tape, const ParamStore& store, const Batch& batch, Var pooled) const;
  std::string path(const std::string& name) const { return prefix_ + "." + name; }

  std::string prefix_;
  HseConfig cfg_;
  std::size_t d_item_;
  std::size_t d_model_;
  TokenEncoder tokens_;
  Cam action_cam_;
  Cam item_cam_;
};

}  // namespace agn
