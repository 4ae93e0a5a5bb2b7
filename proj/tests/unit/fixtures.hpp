#pragma once

#include <algorithm>
#include <random>
#include <string>

#include "agn/hash.hpp"
#include "agn/model.hpp"

namespace agn::testing {

inline ModelConfig tiny_config(HseMode mode = HseMode::kFull, bool use_cam = true) {
  ModelConfig c;
  c.vocab = ActionVocab::short_video();
  c.user_spec = FeatureSpec({FieldSpec::categorical("u", 3, 5), FieldSpec::numeric("age", 30, 10)});
  c.item_spec = FeatureSpec({FieldSpec::categorical("topic", 4, 6)});
  c.d_model = 8;
  c.n_heads = 2;
  c.mlp_hidden = 10;
  c.gate_hidden = 6;
  c.tower_hidden = 7;
  c.history_len = 4;
  c.hse_mode = mode;
  c.use_cam = use_cam;
  return c;
}

// Valid short-video sequence: Start, a random subset of the middle actions with
// sorted timings, Leave.
inline ActionSequence random_sequence(const ActionVocab& v, std::mt19937_64& rng) {
  ActionSequence s;
  s.duration_sec = 10.0 + 20.0 * uniform01(rng);
  std::vector<ActionId> mid;
  for (ActionId a = 0; a < v.num_actions(); ++a)
    if (a != v.start() && a != v.leave() && uniform01(rng) < 0.5) mid.push_back(a);
  std::shuffle(mid.begin(), mid.end(), rng);
  std::vector<double> ts;
  for (std::size_t i = 0; i < mid.size(); ++i) ts.push_back(uniform01(rng));
  std::sort(ts.begin(), ts.end());
  if (v.start()) s.events.push_back({*v.start(), 0.0, std::nullopt});
  for (std::size_t i = 0; i < mid.size(); ++i) s.events.push_back({mid[i], ts[i], std::nullopt});
  if (v.leave()) s.events.push_back({*v.leave(), ts.empty() ? 0.5 : std::max(ts.back(), 0.5), std::nullopt});
  return s;
}

inline Sample random_sample(const ActionVocab& v, std::mt19937_64& rng, std::size_t max_hist) {
  Sample s;
  s.id = "s" + std::to_string(rng() % 100000);
  s.user = {{"u", std::string("u") + std::to_string(rng() % 7)}, {"age", 20.0 + 30 * uniform01(rng)}};
  const std::size_t nh = uniform_index(rng, max_hist + 1);
  for (std::size_t j = 0; j < nh; ++j) {
    HistoryEntry h;
    h.item = {{"topic", std::string("t") + std::to_string(rng() % 9)}};
    h.seq = random_sequence(v, rng);
    s.history.push_back(h);
  }
  s.target_item = {{"topic", std::string("t") + std::to_string(rng() % 9)}};
  s.target_seq = random_sequence(v, rng);
  return s;
}

}  // namespace agn::testing
