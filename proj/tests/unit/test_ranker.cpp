#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "agn/error.hpp"
#include "agn/hash.hpp"
#include "agn/ranker.hpp"
#include "agn/synthgen.hpp"

using namespace agn;

namespace {

const ActionVocab kVocab = ActionVocab::short_video();

ActionSequence seq(std::vector<std::pair<std::string, double>> mid) {
  ActionSequence s;
  s.events.push_back({*kVocab.start(), 0.0, std::nullopt});
  double last = 0;
  for (auto& [n, t] : mid) {
    s.events.push_back({kVocab.id(n), t, std::nullopt});
    last = t;
  }
  s.events.push_back({*kVocab.leave(), std::max(last, 0.95), std::nullopt});
  return s;
}

std::vector<double> spread(std::size_t n, double lo, double hi) {
  std::vector<double> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(lo + (hi - lo) * (i + 0.5) / n);
  return t;
}

std::vector<std::string> ids(const std::vector<RankedItem>& r) {
  std::vector<std::string> o;
  for (auto& x : r) o.push_back(x.id);
  return o;
}

}  // namespace

TEST_CASE("detect_peaks basics") {
  CHECK_THROWS_AS(detect_peaks(spread(99, 0, 1), 50, 2), ValueError);

  const PeakModel flat = detect_peaks(spread(5000, 0, 1), 50, 3);
  CHECK(flat.peak_bins.empty());
  double sum = 0;
  for (double h : flat.histogram) sum += h;
  CHECK(sum == doctest::Approx(1.0));

  for (std::size_t w : {1, 2, 3, 4}) {
    const std::vector<double> spike(200, 0.5);
    const PeakModel m = detect_peaks(spike, 50, w);
    REQUIRE(m.peak_bins.size() == 1);
    CHECK(std::abs(static_cast<long>(m.peak_bins[0]) - 25) <= (w % 2 == 0 ? 1 : 0));
    CHECK(m.half_width == doctest::Approx(w / 50.0));
    CHECK(m.near_peak(0.5));
    CHECK_FALSE(m.near_peak(0.9));
  }
}

TEST_CASE("property: peaks are strict maxima of the smoothed density") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<double> t;
    for (int i = 0; i < 500; ++i) t.push_back(std::pow(uniform01(rng), 0.5 + uniform01(rng)));
    const PeakModel m = detect_peaks(t, 40, 1 + uniform_index(rng, 4));
    for (std::size_t p : m.peak_bins) {
      if (p > 0) CHECK(m.smoothed[p] >= m.smoothed[p - 1]);
      if (p + 1 < m.bins) CHECK(m.smoothed[p] >= m.smoothed[p + 1]);
      CHECK(m.smoothed[p] > 1.2 / 40);
    }
  }
}

TEST_CASE("synthetic bimodal timings give two peaks near the centers") {
  WorldConfig w;
  w.seed = 21;
  w.peak1 = 0.3;
  w.peak2 = 0.7;
  w.like_base = 0.5;
  const SynthData d = generate_world(w, 4000, 100);
  std::vector<double> t;
  const ActionId like = kVocab.id("Like");
  for (const Sample& s : d.samples)
    if (auto p = s.target_seq.position(like)) t.push_back(s.target_seq.events[*p].timing_norm);
  const PeakModel m = detect_peaks(t, 50, 3);
  REQUIRE(m.peak_bins.size() == 2);
  CHECK(std::abs(static_cast<long>(m.peak_bins[0]) - 15) <= 1);
  CHECK(std::abs(static_cast<long>(m.peak_bins[1]) - 35) <= 1);
}

TEST_CASE("adjust_score examples") {
  BoostPolicy p;
  PeakModels none;
  const ActionSequence late = seq({{"Like", 0.9}});
  CHECK(adjust_score(2.0, late, kVocab, none, p) == 2.0);
  p.lambda_t = 1.0;
  CHECK(adjust_score(2.0, late, kVocab, none, p) == doctest::Approx(2.8));
  CHECK(adjust_score(2.0, seq({{"Follow", 0.9}}), kVocab, none, p) == 2.0);
  CHECK(adjust_score(2.0, seq({{"Like", 0.3}}), kVocab, none, p) == 2.0);

  BoostPolicy s;
  s.lambda_s = 0.5;
  CHECK(adjust_score(1.0, seq({{"Follow", 0.2}, {"Like", 0.3}}), kVocab, none, s) == 1.5);
  CHECK(adjust_score(1.0, seq({{"Like", 0.2}, {"Follow", 0.3}}), kVocab, none, s) == 1.0);

  BoostPolicy pk;
  pk.lambda_p = 1.0;
  PeakModels peaks;
  peaks[kVocab.id("Like")] = detect_peaks(std::vector<double>(200, 0.5), 50, 2);
  BoostFactors f;
  // Like sits on the peak and Forward does not: half of the timed actions
  const double a = adjust_score(1.0, seq({{"Like", 0.5}, {"Forward", 0.8}}), kVocab, peaks, pk, &f);
  CHECK(a == doctest::Approx(1.5));
  CHECK(f.peak == doctest::Approx(1.5));
  CHECK(adjust_score(1.0, seq({}), kVocab, peaks, pk) == 1.0);

  CHECK_THROWS_AS(adjust_score(0.0, late, kVocab, none, p), ValueError);
}

TEST_CASE("policy file") {
  const BoostPolicy p = BoostPolicy::from_kv(KvConfig::parse("lambda_t=1\nlambda_s = 0.5\nbins=40\n"));
  CHECK(p.lambda_t == 1.0);
  CHECK(p.lambda_s == 0.5);
  CHECK(p.bins == 40);
  CHECK_THROWS_AS(BoostPolicy::from_kv(KvConfig::parse("lambda_q=1\n")), ConfigError);
  CHECK_THROWS_AS(BoostPolicy::from_kv(KvConfig::parse("lambda_t=-1\n")), ConfigError);
}

TEST_CASE("rank ordering") {
  BoostPolicy id;
  PeakModels none;
  std::vector<Candidate> c = {{"b", 0.5, seq({})}, {"a", 0.5, seq({})}, {"c", 0.9, seq({})}};
  CHECK(ids(rank_candidates(c, kVocab, none, id)) == std::vector<std::string>{"c", "a", "b"});

  BoostPolicy s;
  s.lambda_s = 0.1;
  std::vector<Candidate> two = {{"x", 1.0, seq({{"Like", 0.4}})}, {"y", 1.0, seq({{"Follow", 0.2}, {"Like", 0.4}})}};
  CHECK(ids(rank_candidates(two, kVocab, none, s)).front() == "y");

  c.push_back({"a", 0.1, seq({})});
  CHECK_THROWS_AS(rank_candidates(c, kVocab, none, id), ValueError);
}

TEST_CASE("property: permutation, scale, and monotonicity") {
  std::mt19937_64 rng(31);
  PeakModels peaks;
  peaks[kVocab.id("Like")] = detect_peaks(std::vector<double>(200, 0.7), 50, 2);
  std::vector<std::string> mids = {"Like", "Follow", "Forward", "Collect"};
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<Candidate> c;
    for (int i = 0; i < 25; ++i) {
      std::vector<std::pair<std::string, double>> m;
      std::vector<std::string> pick = mids;
      std::shuffle(pick.begin(), pick.end(), rng);
      pick.resize(uniform_index(rng, 5));
      std::vector<double> t;
      for (std::size_t k = 0; k < pick.size(); ++k) t.push_back(0.05 + 0.9 * uniform01(rng));
      std::sort(t.begin(), t.end());
      for (std::size_t k = 0; k < pick.size(); ++k) m.push_back({pick[k], t[k]});
      // a few base ties
      c.push_back({"c" + std::to_string(i), 0.1 + static_cast<double>(uniform_index(rng, 6)), seq(m)});
    }
    BoostPolicy p;
    p.lambda_t = uniform01(rng);
    p.lambda_s = uniform01(rng);
    p.lambda_p = uniform01(rng);
    const auto base = ids(rank_candidates(c, kVocab, peaks, p));

    auto shuffled = c;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(ids(rank_candidates(shuffled, kVocab, peaks, p)) == base);

    // powers of two keep the products exact
    auto scaled = c;
    for (auto& x : scaled) x.base *= 4.0;
    CHECK(ids(rank_candidates(scaled, kVocab, peaks, p)) == base);

    // raising lambda_s never lets a non-satisfying candidate overtake a satisfying one
    BoostPolicy q = p;
    q.lambda_s += 1.0;
    const auto before = rank_candidates(c, kVocab, peaks, p), after = rank_candidates(c, kVocab, peaks, q);
    auto pos = [](const std::vector<RankedItem>& r, const std::string& id) {
      return std::find_if(r.begin(), r.end(), [&](auto& x) { return x.id == id; }) - r.begin();
    };
    for (const auto& i : before)
      for (const auto& j : before) {
        if (!(i.factors.sequence > 1.0 && j.factors.sequence == 1.0)) continue;
        if (pos(before, i.id) < pos(before, j.id)) CHECK(pos(after, i.id) < pos(after, j.id));
      }
  }
}

TEST_CASE("ranking csv") {
  BoostPolicy p;
  PeakModels none;
  const auto r = rank_candidates({{"a", 0.5, seq({})}}, kVocab, none, p);
  CHECK(ranking_csv(r) == "rank,id,base,adjusted,late_factor,sequence_factor,peak_factor\n1,a,0.5,0.5,1,1,1\n");
}

TEST_CASE("property: follow-first boost lifts true Likes on a planted world") {
  WorldConfig w;
  w.seed = 31;
  w.n_topics = 4;
  w.hist_min = 12;
  w.hist_max = 12;
  w.targets_per_user = 8;
  w.like_base = 0.1;
  w.like_topic = 0.0;
  w.like_quality = 0.0;
  w.like_fan = 0.6;
  w.follow_base = 0.8;
  w.follow_first = 0.05;
  w.follow_first_fan = 0.95;
  const SynthData d = generate_world(w, 300, 100);
  const ActionId like = kVocab.id("Like"), follow = kVocab.id("Follow");

  // decoded stand-in built only from the user's history on the candidate's topic
  auto decoded = [&](const Sample& s) {
    for (const HistoryEntry& h : s.history) {
      if (h.item.at("topic") != s.target_item.at("topic")) continue;
      const auto pf = h.seq.position(follow), pl = h.seq.position(like);
      if (pf && pl && *pf < *pl) return seq({{"Follow", 0.2}, {"Like", 0.4}});
    }
    return seq({{"Like", 0.4}});
  };

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> base(0.5, 1.5);
  std::map<std::string, std::vector<const Sample*>> by_user;
  for (const Sample& s : d.samples) by_user[s.id.substr(0, s.id.find('-'))].push_back(&s);
  BoostPolicy off, on;
  on.lambda_s = 0.5;
  PeakModels none;
  double pos_off = 0, pos_on = 0;
  std::size_t positives = 0;
  for (const auto& [u, list] : by_user) {
    std::vector<Candidate> c;
    for (const Sample* s : list) c.push_back({s->id, base(rng), decoded(*s)});
    auto pos = [&](const BoostPolicy& p) {
      std::map<std::string, double> at;
      for (const RankedItem& r : rank_candidates(c, kVocab, none, p))
        at[r.id] = static_cast<double>(r.rank - 1) / static_cast<double>(c.size() - 1);
      return at;
    };
    const auto a = pos(off), b = pos(on);
    for (const Sample* s : list)
      if (s->target_seq.position(like)) {
        ++positives;
        pos_off += a.at(s->id);
        pos_on += b.at(s->id);
      }
  }
  REQUIRE(positives > 200);
  pos_off /= static_cast<double>(positives);
  pos_on /= static_cast<double>(positives);
  CHECK(pos_off == doctest::Approx(0.5).epsilon(0.05));
  CHECK(pos_on < pos_off - 0.02);
}
