#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agn/cam.hpp"
#include "agn/domain.hpp"
#include "agn/param_store.hpp"
#include "agn/tape.hpp"
#include "agn/tokens.hpp"

namespace agn {

struct GenStep {
  std::vector<double> class_probs;  // M + 1 classes, unconstrained
  double timing_pred = 0.5;
};

struct GeneratedSequence {
  std::vector<GenStep> steps;
  ActionSequence decoded;
};

// F_context = F_u || F_target || Vec_hist. `user` may be absent when the user
// feature spec is empty.
Var build_context(std::optional<Var> user, Var target, Var vec_hist, std::size_t expected_dim);

struct AdeConfig {
  CamConfig cam;  // causal is forced on
  std::size_t tower_hidden = 32;
};

// Tape outputs of the generator over L positions.
struct AdeSteps {
  Var log_probs;  // [n, L, M+1]
  Var probs;      // [n, L, M+1]
  Var timing;     // [n, L], in (0, 1)
};

// Causal generator. Input position 0 is the begin token; position i > 0 carries
// the (action, timing) emitted at i-1. Every input token also receives a linear
// projection of F_context, then a causal attention block with ctx = F_context
// feeds two towers: class (softmax over M+1) and timing (sigmoid).
class Ade {
 public:
  Ade(const ActionVocab& vocab, AdeConfig cfg, std::string prefix = "ade");

  void register_params(ParamStore& store) const;
  const ActionVocab& vocab() const noexcept { return vocab_; }
  const AdeConfig& config() const noexcept { return cfg_; }
  std::size_t max_len() const noexcept { return vocab_.num_actions(); }

  // prefix_actions/timings are [n * len] and hold the tokens fed after the begin
  // token; position i of the output predicts label i given prefix[0 .. i-1].
  // len may be 0 .. M-1; the output spans len + 1 positions.
  AdeSteps forward(Tape& tape, const ParamStore& store, Var ctx,
                   std::span<const ActionId> prefix_actions, std::span<const double> prefix_timings,
                   std::size_t n, std::size_t len) const;

  // Teacher forcing: labels are [n * M] (PAD past the label); output spans M positions.
  AdeSteps teacher_forced(Tape& tape, const ParamStore& store, Var ctx,
                          std::span<const ActionId> label_actions,
                          std::span<const double> label_timings, std::size_t n) const;

  // Greedy constrained decoding for each row of ctx ([n, d_ctx]).
  std::vector<GeneratedSequence> generate(const ParamStore& store, const NDArray& ctx) const;

  // Step outputs obtained one position at a time while feeding the label as the
  // prefix; returns min(len + 1, M) steps. Used to check teacher forcing.
  std::vector<GenStep> incremental_steps(const ParamStore& store, const NDArray& ctx_row,
                                         const ActionSequence& label) const;

 private:
  std::string path(const std::string& name) const { return prefix_ + "." + name; }

  ActionVocab vocab_;
  AdeConfig cfg_;
  std::string prefix_;
  TokenEncoder tokens_;
  Cam cam_;
};

// Max over steps of the class probability of `action`.
double action_probability(std::span<const GenStep> steps, ActionId action, const ActionVocab& vocab);
// Raw: sum_i p_i t_i. Normalized: the same divided by sum_i p_i.
double action_timing_estimate(std::span<const GenStep> steps, ActionId action, bool normalized,
                              const ActionVocab& vocab);

}  // namespace agn
