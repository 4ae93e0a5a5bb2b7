#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "agn/domain.hpp"
#include "agn/features.hpp"
#include "agn/kvconfig.hpp"
#include "agn/sample.hpp"

namespace agn {

// Synthetic short-video world. Every user has a preferred topic and, per topic, a
// hidden "fan" flag. Each interaction with an item draws:
//   Follow ~ Bernoulli(p_follow), p_follow = clamp(follow_base + follow_topic*match + follow_fan*fan)
//   Like   ~ Bernoulli(clamp(p_like + follow_like_boost * Follow)),
//            p_like = clamp(like_base + like_topic*match + like_quality*(quality-0.5) + like_fan*fan)
//   Forward, Collect ~ Bernoulli(forward_base), Bernoulli(collect_base)
// Like timing comes from a two-component truncated Gaussian mixture with centers
// peak1/peak2 (width peak_width); the item's format selects which center carries
// weight peak_major. When both Follow and Like occur, Follow comes first with
// probability follow_first (follow_first_fan for fans of the item's topic).
// Start is emitted at 0 and Leave at max(watch fraction, last action).
struct WorldConfig {
  std::uint64_t seed = 1;
  std::size_t n_topics = 4;
  std::size_t history_len = 10;
  std::size_t hist_min = 0;
  std::size_t hist_max = 10;
  std::size_t targets_per_user = 1;
  double pref_rate = 0.4;  // chance an interaction is drawn from the preferred topic
  bool user_pref_observed = true;
  double fan_rate = 0.5;

  double like_base = 0.1;
  double like_topic = 0.5;
  double like_quality = 0.3;
  double like_fan = 0.0;
  double follow_base = 0.15;
  double follow_topic = 0.2;
  double follow_fan = 0.0;
  double forward_base = 0.1;
  double collect_base = 0.1;
  double follow_like_boost = 0.1;
  double follow_first = 0.5;
  double follow_first_fan = 0.5;

  double peak1 = 0.3;
  double peak2 = 0.7;
  double peak_width = 0.04;
  double peak_major = 0.8;
  double watch_min = 0.3;
  double duration_min = 10.0;
  double duration_max = 60.0;

  void validate() const;
  static WorldConfig from_kv(const KvConfig& kv);
  KvConfig to_kv() const;
};

ActionVocab world_vocab();
FeatureSpec world_user_spec(const WorldConfig& w);
FeatureSpec world_item_spec(const WorldConfig& w);

// Per-sample marginal probability of every real action given the sample's
// observable and hidden generating state (the Bayes oracle).
using OracleProbs = std::map<std::string, std::vector<double>>;  // sample id -> [M]

struct SynthData {
  std::vector<Sample> samples;
  std::vector<std::vector<double>> oracle;  // aligned with samples, [M] each
};

SynthData generate_world(const WorldConfig& w, std::size_t n_users, std::size_t n_items);

void write_oracle(const std::string& path, const SynthData& data, const ActionVocab& vocab);
OracleProbs read_oracle(const std::string& path, const ActionVocab& vocab);

// AUC of the oracle probabilities for `action` against the realized labels.
double oracle_auc(const std::vector<Sample>& samples,
                  const std::vector<std::vector<double>>& oracle, ActionId action);

}  // namespace agn
