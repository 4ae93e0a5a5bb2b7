#include <doctest.h>

#include <cmath>
#include <random>

#include "agn/error.hpp"
#include "agn/evaluator.hpp"
#include "agn/hash.hpp"
#include "agn/synthgen.hpp"
#include "fixtures.hpp"

using namespace agn;

namespace {

const ActionVocab kVocab = ActionVocab::short_video();

ActionSequence with_like(double t) {
  ActionSequence s;
  s.events.push_back({*kVocab.start(), 0.0, std::nullopt});
  s.events.push_back({kVocab.id("Like"), t, std::nullopt});
  s.events.push_back({*kVocab.leave(), std::max(t, 0.9), std::nullopt});
  return s;
}

ActionSequence plain() {
  ActionSequence s;
  s.events.push_back({*kVocab.start(), 0.0, std::nullopt});
  s.events.push_back({*kVocab.leave(), 0.9, std::nullopt});
  return s;
}

// M steps that put all mass on the label's actions at their positions.
std::vector<GenStep> perfect_steps(const ActionSequence& label) {
  std::vector<GenStep> steps(kVocab.num_actions());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    steps[i].class_probs.assign(kVocab.num_classes(), 0.0);
    if (i < label.events.size()) {
      steps[i].class_probs[label.events[i].action] = 1.0;
      steps[i].timing_pred = label.events[i].timing_norm;
    } else {
      steps[i].class_probs[kVocab.pad()] = 1.0;
    }
  }
  return steps;
}

Sample sample_of(ActionSequence seq, const std::string& id) {
  Sample s;
  s.id = id;
  s.target_seq = std::move(seq);
  return s;
}

}  // namespace

TEST_CASE("sequence statistics") {
  const ActionId like = kVocab.id("Like"), follow = kVocab.id("Follow");
  auto both = [&](bool follow_first) {
    ActionSequence s = plain();
    const ActionEvent a{follow_first ? follow : like, 0.2, std::nullopt};
    const ActionEvent b{follow_first ? like : follow, 0.4, std::nullopt};
    s.events.insert(s.events.begin() + 1, {a, b});
    return s;
  };
  std::vector<ActionSequence> seqs = {both(true), both(true), both(true), both(false), plain()};
  const SequenceStats st = sequence_stats(seqs, kVocab);
  CHECK(st.like_and_follow == 4);
  CHECK(*st.follow_first == 0.75);
  CHECK(*st.like_first == 0.25);
  CHECK(st.timed_actions == 8);
  CHECK_FALSE(st.near_peak.has_value());
  CHECK(st.order_violation_rate() == 0.0);

  std::vector<ActionSequence> none = {plain(), with_like(0.3)};
  CHECK_FALSE(sequence_stats(none, kVocab).follow_first.has_value());

  PeakModels peaks;
  peaks[like] = detect_peaks(std::vector<double>(150, 0.3), 50, 1);
  const SequenceStats sp = sequence_stats(none, kVocab, &peaks);
  CHECK(*sp.near_peak == 1.0);

  ActionSequence bad = with_like(0.95);
  bad.events.back().timing_norm = 0.5;
  std::vector<ActionSequence> mixed = {bad, plain()};
  CHECK(sequence_stats(mixed, kVocab).order_violation_rate() == 0.5);
}

TEST_CASE("perfect steps give perfect metrics") {
  std::vector<Sample> s;
  std::vector<std::vector<GenStep>> steps;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    s.push_back(sample_of(i % 3 ? with_like(0.05 + 0.9 * uniform01(rng)) : plain(), "s" + std::to_string(i)));
    steps.push_back(perfect_steps(s.back().target_seq));
  }
  const auto m = action_metrics(s, steps, kVocab);
  const ActionMetrics& like = m[kVocab.id("Like")];
  CHECK(*like.auc == 1.0);
  CHECK(*like.mae == doctest::Approx(0.0));
  CHECK(*like.mae_raw == doctest::Approx(0.0));
  CHECK(like.timing_count == 33);
  CHECK_FALSE(m[*kVocab.start()].auc.has_value());
  CHECK_FALSE(m[kVocab.id("Follow")].mae.has_value());
}

TEST_CASE("constant 0.5 timing against uniform labels") {
  std::mt19937_64 rng(2);
  std::vector<Sample> s;
  std::vector<std::vector<GenStep>> steps;
  for (int i = 0; i < 10000; ++i) {
    s.push_back(sample_of(with_like(uniform01(rng)), "s" + std::to_string(i)));
    auto st = perfect_steps(s.back().target_seq);
    for (auto& g : st) g.timing_pred = 0.5;
    steps.push_back(std::move(st));
  }
  const ActionMetrics like = action_metrics(s, steps, kVocab)[kVocab.id("Like")];
  CHECK(std::fabs(*like.mae - 0.25) < 0.01);
  CHECK(*like.mae == doctest::Approx(*like.mae_half));
}

TEST_CASE("raw and normalized timing differ when mass does not sum to one") {
  std::vector<Sample> s = {sample_of(with_like(0.6), "a"), sample_of(plain(), "b")};
  std::vector<std::vector<GenStep>> steps = {perfect_steps(s[0].target_seq), perfect_steps(s[1].target_seq)};
  const ActionId like = kVocab.id("Like");
  steps[0][1].class_probs[like] = 0.5;
  steps[0][1].class_probs[kVocab.pad()] = 0.5;
  const ActionMetrics m = action_metrics(s, steps, kVocab)[like];
  CHECK(*m.mae == doctest::Approx(0.0));
  CHECK(*m.mae_raw == doctest::Approx(0.3));
}

TEST_CASE("oracle probabilities as scores reproduce the oracle AUC") {
  WorldConfig w;
  const SynthData d = generate_world(w, 2000, 50);
  for (const char* name : {"Like", "Follow"}) {
    const ActionId a = kVocab.id(name);
    std::vector<double> scores;
    for (const auto& p : d.oracle) scores.push_back(p[a]);
    CHECK(*action_auc(d.samples, scores, a) == oracle_auc(d.samples, d.oracle, a));
  }
}

TEST_CASE("an untrained model is at chance under the null") {
  WorldConfig w;
  w.like_topic = w.like_quality = 0.0;
  w.like_base = 0.3;
  w.follow_like_boost = 0.0;
  w.follow_topic = 0.0;
  const SynthData d = generate_world(w, 10000, 100);
  ModelConfig mc;
  mc.user_spec = world_user_spec(w);
  mc.item_spec = world_item_spec(w);
  mc.d_model = 8;
  mc.n_heads = 2;
  mc.history_len = 4;
  const Model m(mc);
  const ParamStore s = m.init_params(3);
  EvalOptions eo;
  eo.batch_size = 512;
  const EvalReport r = evaluate(m, s, d.samples, eo);
  const double a = *r.action("Like").auc;
  CHECK(a >= 0.45);
  CHECK(a <= 0.55);
}

TEST_CASE("evaluation is pure and independent of thread count") {
  std::mt19937_64 rng(4);
  std::vector<Sample> samples;
  for (int i = 0; i < 70; ++i) samples.push_back(agn::testing::random_sample(kVocab, rng, 3));
  const Model m(agn::testing::tiny_config());
  const ParamStore s = m.init_params(5);
  EvalOptions eo;
  eo.batch_size = 16;
  eo.loss_weights = LossWeights{};
  const std::string a = to_json(evaluate(m, s, samples, eo)).dump();
  CHECK(to_json(evaluate(m, s, samples, eo)).dump() == a);
  eo.jobs = 3;
  CHECK(to_json(evaluate(m, s, samples, eo)).dump() == a);
  eo.teacher_forced = true;
  const EvalReport tf = evaluate(m, s, samples, eo);
  CHECK(tf.mode == "teacher");
  CHECK_FALSE(tf.generated.has_value());

  const std::string csv = eval_table_csv({{"full", evaluate(m, s, samples, eo)}}, kVocab);
  CHECK(csv.rfind("model,Start_auc,Start_mae,Like_auc", 0) == 0);
}
