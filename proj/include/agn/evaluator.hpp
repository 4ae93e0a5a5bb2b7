#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agn/ade.hpp"
#include "agn/losses.hpp"
#include "agn/model.hpp"
#include "agn/ranker.hpp"
#include "agn/sample.hpp"

namespace agn {

struct ActionMetrics {
  std::string action;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::optional<double> auc;       // absent for single-class labels
  std::size_t timing_count = 0;    // samples where the action occurred
  std::optional<double> mae;       // normalized estimate
  std::optional<double> mae_raw;   // raw estimate
  std::optional<double> mae_half;  // constant 0.5 predictor, same samples
};

struct SequenceStats {
  std::size_t sequences = 0;
  std::size_t monotone = 0;
  std::size_t like_and_follow = 0;
  std::optional<double> follow_first;  // among sequences with both
  std::optional<double> like_first;
  std::size_t timed_actions = 0;     // excluding Start and Leave
  std::optional<double> near_peak;   // needs a peak model

  double order_violation_rate() const {
    return sequences ? 1.0 - static_cast<double>(monotone) / static_cast<double>(sequences) : 0.0;
  }
};

SequenceStats sequence_stats(std::span<const ActionSequence> seqs, const ActionVocab& vocab,
                             const PeakModels* peaks = nullptr);

// Per (sample, action) scores and timing estimates, then the metrics. steps[i]
// belongs to samples[i].
std::vector<ActionMetrics> action_metrics(std::span<const Sample> samples,
                                          std::span<const std::vector<GenStep>> steps,
                                          const ActionVocab& vocab);

// AUC of `scores` against "action present in the target"; absent when single-class.
std::optional<double> action_auc(std::span<const Sample> samples, std::span<const double> scores,
                                 ActionId action);

struct LossValues {
  double cls = 0, reg = 0, order = 0, total = 0;
};

struct EvalOptions {
  bool teacher_forced = false;  // diagnosis only; default is free-running generation
  std::size_t batch_size = 256;
  std::size_t jobs = 1;
  const PeakModels* peaks = nullptr;
  std::optional<LossWeights> loss_weights;  // also report teacher-forced losses
};

struct Predictions {
  std::vector<std::vector<GenStep>> steps;
  std::vector<ActionSequence> decoded;  // empty in teacher-forced mode
};

Predictions predict(const Model& model, const ParamStore& store, std::span<const Sample> samples,
                    const EvalOptions& opts);

// Teacher-forced losses averaged over samples.
LossValues eval_losses(const Model& model, const ParamStore& store, std::span<const Sample> samples,
                       const LossWeights& w, std::size_t batch_size);

struct EvalReport {
  std::string mode;  // "free" or "teacher"
  std::size_t samples = 0;
  std::vector<ActionMetrics> actions;
  std::optional<SequenceStats> generated;
  std::optional<LossValues> loss;

  const ActionMetrics& action(const std::string& name) const;
};

EvalReport evaluate(const Model& model, const ParamStore& store, std::span<const Sample> samples,
                    const EvalOptions& opts);

nlohmann::ordered_json to_json(const ActionMetrics& m);
nlohmann::ordered_json to_json(const SequenceStats& s);
nlohmann::ordered_json to_json(const LossValues& l);
nlohmann::ordered_json to_json(const EvalReport& r);

// Generation JSONL, one object per sample:
//   {"id", "duration_sec", "decoded": [{"action", "t", "t_sec"}],
//    "steps": [{"probs": {class: p}, "timing": t}],
//    "p_act": {action: p}, "timing": {action: normalized estimate}}
struct GenerationRecord {
  std::string id;
  ActionSequence decoded;
  std::vector<GenStep> steps;
};

std::string generation_to_json(const Sample& sample, std::span<const GenStep> steps,
                               const ActionSequence& decoded, const ActionVocab& vocab);
// Free-running predictions only (decoded sequences required).
void write_generations(const std::string& path, std::span<const Sample> samples, const Predictions& p,
                       const ActionVocab& vocab);
std::vector<GenerationRecord> read_generations(const std::string& path, const ActionVocab& vocab);

// One row per named report, AUC and MAE columns per real action.
std::string eval_table_csv(const std::vector<std::pair<std::string, EvalReport>>& rows,
                           const ActionVocab& vocab);

}  // namespace agn
