#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "agn/domain.hpp"
#include "agn/error.hpp"
#include "agn/features.hpp"
#include "agn/hash.hpp"
#include "agn/sample.hpp"
#include "agn/tokens.hpp"
#include "doctest.h"

using namespace agn;

namespace {

ActionSequence seq_of(const ActionVocab& v, std::initializer_list<std::pair<const char*, double>> ev,
                      double duration = 18.0) {
  ActionSequence s;
  s.duration_sec = duration;
  for (auto& [name, t] : ev) s.events.push_back({v.id(name), t, t * duration});
  return s;
}

}  // namespace

TEST_CASE("vocab layout") {
  ActionVocab v = ActionVocab::short_video();
  CHECK(v.num_actions() == 6);
  CHECK(v.num_classes() == 7);
  CHECK(v.pad() == 6);
  CHECK(v.bos() == 7);
  CHECK(v.start() == v.id("Start"));
  CHECK(v.leave() == v.id("leave"));
  ActionVocab e = ActionVocab::ecommerce();
  CHECK(e.num_actions() == 4);
  CHECK(!e.start());
  CHECK(!e.leave());
  CHECK_THROWS_AS(ActionVocab({"a"}, std::nullopt, std::nullopt), ValueError);
  CHECK_THROWS_AS(ActionVocab({"a", "A"}, std::nullopt, std::nullopt), ValueError);
  CHECK_THROWS_AS(v.id("PAD"), ValueError);
}

TEST_CASE("normalize_timing") {
  CHECK(normalize_timing(2, 18) == doctest::Approx(0.1111).epsilon(1e-4));
  CHECK(normalize_timing(2, 18) == 2.0 / 18.0);
  CHECK(normalize_timing(0, 5) == 0.0);
  CHECK(normalize_timing(25, 20) == 1.0);
  CHECK_THROWS_AS(normalize_timing(1, 0), ValueError);
  CHECK_THROWS_AS(normalize_timing(1, -3), ValueError);
}

TEST_CASE("sequence validation accepts the figure timeline") {
  ActionVocab v = ActionVocab::short_video();
  ActionSequence s = seq_of(v, {{"Start", 0}, {"Like", 2 / 18.0}, {"Follow", 9 / 18.0},
                                {"Forward", 16 / 18.0}, {"Leave", 1.0}});
  CHECK(!check_sequence(s, v));

  ActionSequence dup = seq_of(v, {{"Start", 0}, {"Like", 0.1}, {"Like", 0.2}, {"Leave", 1}});
  CHECK(check_sequence(dup, v));
  ActionSequence no_start = seq_of(v, {{"Like", 0.1}, {"Leave", 1}});
  CHECK(check_sequence(no_start, v));
  ActionSequence late_start = seq_of(v, {{"Start", 0.1}, {"Leave", 1}});
  CHECK(check_sequence(late_start, v));
  ActionSequence leave_mid = seq_of(v, {{"Start", 0}, {"Leave", 0.5}, {"Like", 0.6}});
  CHECK(check_sequence(leave_mid, v));
  ActionSequence empty;
  CHECK(check_sequence(empty, v));
  ActionSequence bad_sec = s;
  bad_sec.events[1].timing_sec = 5.0;
  CHECK(check_sequence(bad_sec, v));
  ActionSequence pad = s;
  pad.events[1].action = v.pad();
  CHECK(check_sequence(pad, v));
  CHECK_THROWS_AS(validate_sequence(dup, v), ValueError);

  ActionVocab e = ActionVocab::ecommerce();
  CHECK(!check_sequence(seq_of(e, {{"Cart", 0.3}, {"Click", 0.5}}), e));
}

TEST_CASE("property: permutations that break monotone timing are rejected") {
  ActionVocab v = ActionVocab::ecommerce();
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    ActionSequence s;
    s.duration_sec = 10;
    std::vector<double> ts;
    const std::size_t len = 2 + uniform_index(rng, 3);
    for (std::size_t i = 0; i < len; ++i) ts.push_back(uniform01(rng));
    std::sort(ts.begin(), ts.end());
    std::vector<ActionId> ids = {0, 1, 2, 3};
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t i = 0; i < len; ++i) s.events.push_back({ids[i], ts[i], std::nullopt});
    REQUIRE(!check_sequence(s, v));
    std::vector<std::size_t> perm(len);
    for (std::size_t i = 0; i < len; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    ActionSequence p = s;
    for (std::size_t i = 0; i < len; ++i) p.events[i] = s.events[perm[i]];
    CHECK(is_monotone(p) == !check_sequence(p, v).has_value());
    if (!is_monotone(p)) {
      CHECK(check_sequence(p, v));
      CHECK(!check_sequence(p, v, {.monotone_timing = false}));
    }
  }
}

TEST_CASE("feature encoding") {
  FeatureSpec spec({FieldSpec::categorical("gender", 3, 4), FieldSpec::numeric("age", 30, 10),
                    FieldSpec::categorical("city", 2, 1)});
  CHECK(spec.total_dim() == 6);
  ParamStore store(5);
  register_feature_params(store, spec, "user");
  CHECK(store.contains("user.gender"));
  CHECK(store.contains("user.city"));

  NDArray none = encode_features({}, spec, "user", store);
  CHECK(none.shape() == Shape{6});
  for (double x : none.raw()) CHECK(x == 0.0);

  FieldValues a{{"gender", std::string("f")}, {"age", 40.0}, {"city", std::string("x")}};
  FieldValues b{{"gender", std::string("f")}, {"age", 20.0}, {"city", std::string("y")}};
  NDArray ea = encode_features(a, spec, "user", store);
  NDArray eb = encode_features(b, spec, "user", store);
  for (int i = 0; i < 3; ++i) CHECK(ea[i] == eb[i]);
  CHECK(ea[3] == doctest::Approx(1.0));
  CHECK(eb[3] == doctest::Approx(-1.0));
  // one bucket: "x" and "y" collide
  CHECK(ea[4] == eb[4]);
  CHECK(ea[5] == eb[5]);
  CHECK(ea[4] != 0.0);

  CHECK_THROWS_AS(encode_features({{"zip", 1.0}}, spec, "user", store), ValueError);
  CHECK_THROWS_AS(encode_features({{"age", std::string("old")}}, spec, "user", store), ValueError);

  Tape t;
  const FieldValues* rows[] = {&a, &b, &a};
  Var m = encode_features(t, store, spec, "user", rows);
  CHECK(m.shape() == Shape{3, 6});
  for (std::size_t j = 0; j < 6; ++j) CHECK(m.value().at(0, j) == m.value().at(2, j));
}

TEST_CASE("action tokens") {
  ActionVocab v = ActionVocab::short_video();
  TokenEncoder enc(v, 8);
  ParamStore store(9);
  enc.register_params(store);
  const NDArray& w_t = store.value("tok.timing");

  ActionId like = v.id("Like");
  NDArray a = enc.encode_one({like, 0.1, std::nullopt}, 2, store);
  NDArray b = enc.encode_one({like, 0.9, std::nullopt}, 2, store);
  CHECK(a.shape() == Shape{8});
  for (std::size_t j = 0; j < 8; ++j) CHECK(b[j] - a[j] == doctest::Approx(0.8 * w_t[j]).epsilon(1e-12));

  NDArray p = enc.encode_one({v.pad(), 0.7, std::nullopt}, 3, store);
  NDArray q = enc.encode_one({v.pad(), 0.2, std::nullopt}, 5, store);
  const NDArray& pos = store.value("tok.position");
  for (std::size_t j = 0; j < 8; ++j)
    CHECK(p[j] - q[j] == doctest::Approx(pos.at(3, j) - pos.at(5, j)).epsilon(1e-12));

  CHECK_THROWS_AS(enc.encode_one({like, 0.1, std::nullopt}, v.num_actions() + 2, store), ValueError);
  CHECK_NOTHROW(enc.encode_one({like, 0.1, std::nullopt}, v.num_actions() + 1, store));
}

TEST_CASE("token encoding is deterministic") {
  ActionVocab v = ActionVocab::short_video();
  TokenEncoder enc(v, 8);
  ParamStore s1(4), s2(4);
  enc.register_params(s1);
  enc.register_params(s2);
  std::vector<ActionId> acts = {0, 1, 5, v.pad()};
  std::vector<double> ts = {0, 0.3, 1, 0};
  std::vector<std::size_t> pos = {0, 1, 2, 3};
  Tape t1, t2;
  Var a = enc.encode(t1, s1, acts, ts, pos, 1, 4);
  Var b = enc.encode(t2, s2, acts, ts, pos, 1, 4);
  CHECK(a.value() == b.value());
}

TEST_CASE("sample JSON-lines round trip") {
  ActionVocab v = ActionVocab::short_video();
  Sample s;
  s.id = "u1:i9";
  s.user = {{"gender", std::string("m")}, {"age", 31.5}};
  HistoryEntry h;
  h.item = {{"topic", std::string("t3")}};
  h.seq = seq_of(v, {{"Start", 0}, {"Like", 0.25}, {"Leave", 0.75}}, 20);
  h.timestamp = 1.4e9;
  s.history.push_back(h);
  s.target_item = {{"topic", std::string("t1")}, {"len", 18.0}};
  s.target_seq = seq_of(v, {{"Start", 0}, {"Follow", 0.5}, {"Leave", 1}}, 18);
  validate_sample(s, v);

  std::string line = sample_to_json(s, v);
  CHECK(line.find('\n') == std::string::npos);
  Sample back = sample_from_json(line, v);
  CHECK(back == s);

  auto path = std::filesystem::temp_directory_path() / "agn_sample_rt.jsonl";
  Sample s2 = s;
  s2.id = "u2:i1";
  s2.history.clear();
  write_samples(path.string(), {s, s2}, v);
  auto all = read_samples(path.string(), v);
  REQUIRE(all.size() == 2);
  CHECK(all[0] == s);
  CHECK(all[1] == s2);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(sample_from_json("{not json", v), FormatError);
}
