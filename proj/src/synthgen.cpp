#include "agn/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "agn/error.hpp"
#include "agn/fileio.hpp"
#include "agn/hash.hpp"
#include "agn/metrics.hpp"

namespace agn {

namespace {

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

void check_prob(const char* key, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key, std::string(key) + " must lie in [0, 1]");
}
void check_weight(const char* key, double v) {
  if (!(v >= -1.0 && v <= 1.0)) throw ConfigError(key, std::string(key) + " must lie in [-1, 1]");
}

std::string topic_name(std::size_t k) { return "t" + std::to_string(k); }

// Smallest bucket count >= 2n under which the n values hash apart.
std::size_t collision_free_buckets(const char* field, std::size_t n, std::string (*name)(std::size_t)) {
  for (std::size_t b = std::max<std::size_t>(2 * n, 2);; ++b) {
    FieldSpec f = FieldSpec::categorical(field, 1, b);
    std::set<std::size_t> seen;
    for (std::size_t k = 0; k < n; ++k) seen.insert(feature_bucket(f, name(k)));
    if (seen.size() == n) return b;
  }
}

std::string format_name(std::size_t k) { return k == 0 ? "a" : "b"; }

struct Item {
  std::size_t topic;
  double quality;
  std::size_t format;
};

double truncated_normal(std::mt19937_64& rng, double mean, double sd) {
  if (sd == 0.0) return mean;
  for (;;) {
    const double x = mean + sd * standard_normal(rng);
    if (x > 0.0 && x < 1.0) return x;
  }
}

}  // namespace

void WorldConfig::validate() const {
  if (n_topics == 0) throw ConfigError("n_topics", "n_topics must be >= 1");
  if (history_len == 0) throw ConfigError("history_len", "history_len must be >= 1");
  if (hist_min > hist_max) throw ConfigError("hist_min", "hist_min must be <= hist_max");
  if (targets_per_user == 0) throw ConfigError("targets_per_user", "targets_per_user must be >= 1");
  check_prob("pref_rate", pref_rate);
  check_prob("fan_rate", fan_rate);
  check_prob("like_base", like_base);
  check_weight("like_topic", like_topic);
  check_weight("like_quality", like_quality);
  check_weight("like_fan", like_fan);
  check_prob("follow_base", follow_base);
  check_weight("follow_topic", follow_topic);
  check_weight("follow_fan", follow_fan);
  check_prob("forward_base", forward_base);
  check_prob("collect_base", collect_base);
  check_prob("follow_like_boost", follow_like_boost);
  check_prob("follow_first", follow_first);
  check_prob("follow_first_fan", follow_first_fan);
  if (!(peak1 > 0 && peak1 < 1)) throw ConfigError("peak1", "peak1 must lie in (0, 1)");
  if (!(peak2 > 0 && peak2 < 1)) throw ConfigError("peak2", "peak2 must lie in (0, 1)");
  if (!(peak_width >= 0)) throw ConfigError("peak_width", "peak_width must be >= 0");
  if (std::fabs(peak1 - peak2) < 2 * peak_width)
    throw ConfigError("peak2", "peak centers must be at least 2*peak_width apart");
  check_prob("peak_major", peak_major);
  check_prob("watch_min", watch_min);
  if (!(duration_min > 0 && duration_max >= duration_min))
    throw ConfigError("duration_min", "durations must satisfy 0 < duration_min <= duration_max");
}

WorldConfig WorldConfig::from_kv(const KvConfig& kv) {
  WorldConfig w;
  kv.read("seed", w.seed);
  kv.read("n_topics", w.n_topics);
  kv.read("history_len", w.history_len);
  kv.read("hist_min", w.hist_min);
  kv.read("hist_max", w.hist_max);
  kv.read("targets_per_user", w.targets_per_user);
  kv.read("pref_rate", w.pref_rate);
  kv.read("user_pref_observed", w.user_pref_observed);
  kv.read("fan_rate", w.fan_rate);
  kv.read("like_base", w.like_base);
  kv.read("like_topic", w.like_topic);
  kv.read("like_quality", w.like_quality);
  kv.read("like_fan", w.like_fan);
  kv.read("follow_base", w.follow_base);
  kv.read("follow_topic", w.follow_topic);
  kv.read("follow_fan", w.follow_fan);
  kv.read("forward_base", w.forward_base);
  kv.read("collect_base", w.collect_base);
  kv.read("follow_like_boost", w.follow_like_boost);
  kv.read("follow_first", w.follow_first);
  kv.read("follow_first_fan", w.follow_first_fan);
  kv.read("peak1", w.peak1);
  kv.read("peak2", w.peak2);
  kv.read("peak_width", w.peak_width);
  kv.read("peak_major", w.peak_major);
  kv.read("watch_min", w.watch_min);
  kv.read("duration_min", w.duration_min);
  kv.read("duration_max", w.duration_max);
  kv.reject_unknown();
  w.validate();
  return w;
}

KvConfig WorldConfig::to_kv() const {
  KvConfig kv;
  auto num = [](double v) {
    std::ostringstream o;
    o.precision(17);
    o << v;
    return o.str();
  };
  kv.set("seed", std::to_string(seed));
  kv.set("n_topics", std::to_string(n_topics));
  kv.set("history_len", std::to_string(history_len));
  kv.set("hist_min", std::to_string(hist_min));
  kv.set("hist_max", std::to_string(hist_max));
  kv.set("targets_per_user", std::to_string(targets_per_user));
  kv.set("pref_rate", num(pref_rate));
  kv.set("user_pref_observed", user_pref_observed ? "true" : "false");
  kv.set("fan_rate", num(fan_rate));
  kv.set("like_base", num(like_base));
  kv.set("like_topic", num(like_topic));
  kv.set("like_quality", num(like_quality));
  kv.set("like_fan", num(like_fan));
  kv.set("follow_base", num(follow_base));
  kv.set("follow_topic", num(follow_topic));
  kv.set("follow_fan", num(follow_fan));
  kv.set("forward_base", num(forward_base));
  kv.set("collect_base", num(collect_base));
  kv.set("follow_like_boost", num(follow_like_boost));
  kv.set("follow_first", num(follow_first));
  kv.set("follow_first_fan", num(follow_first_fan));
  kv.set("peak1", num(peak1));
  kv.set("peak2", num(peak2));
  kv.set("peak_width", num(peak_width));
  kv.set("peak_major", num(peak_major));
  kv.set("watch_min", num(watch_min));
  kv.set("duration_min", num(duration_min));
  kv.set("duration_max", num(duration_max));
  return kv;
}

ActionVocab world_vocab() { return ActionVocab::short_video(); }

FeatureSpec world_user_spec(const WorldConfig& w) {
  std::vector<FieldSpec> f = {FieldSpec::categorical("uid", 2, 16)};
  if (w.user_pref_observed)
    f.push_back(FieldSpec::categorical("pref", 4, collision_free_buckets("pref", w.n_topics, topic_name)));
  return FeatureSpec(std::move(f));
}

FeatureSpec world_item_spec(const WorldConfig& w) {
  return FeatureSpec({FieldSpec::categorical("topic", 4, collision_free_buckets("topic", w.n_topics, topic_name)),
                      FieldSpec::categorical("format", 2, collision_free_buckets("format", 2, format_name)),
                      FieldSpec::numeric("quality", 0.5, 0.29)});
}

SynthData generate_world(const WorldConfig& w, std::size_t n_users, std::size_t n_items) {
  w.validate();
  if (n_items == 0) throw ValueError("n_items must be >= 1");
  const ActionVocab v = world_vocab();
  const ActionId start = *v.start(), leave = *v.leave(), like = v.id("Like"), follow = v.id("Follow"),
                 forward = v.id("Forward"), collect = v.id("Collect");

  std::vector<Item> items(n_items);
  std::vector<std::vector<std::size_t>> by_topic(w.n_topics);
  {
    std::mt19937_64 rng(derive_seed(w.seed, "items"));
    for (std::size_t i = 0; i < n_items; ++i) {
      items[i].topic = uniform_index(rng, w.n_topics);
      items[i].quality = uniform01(rng);
      items[i].format = uniform_index(rng, 2);
      by_topic[items[i].topic].push_back(i);
    }
  }
  auto item_fields = [&](std::size_t i) {
    return FieldValues{{"topic", topic_name(items[i].topic)},
                       {"format", format_name(items[i].format)},
                       {"quality", items[i].quality}};
  };

  SynthData out;
  for (std::size_t u = 0; u < n_users; ++u) {
    std::mt19937_64 rng(derive_seed(w.seed, "user:" + std::to_string(u)));
    const std::size_t pref = uniform_index(rng, w.n_topics);
    std::vector<bool> fan(w.n_topics);
    for (std::size_t k = 0; k < w.n_topics; ++k) fan[k] = uniform01(rng) < w.fan_rate;
    FieldValues user{{"uid", "u" + std::to_string(u)}};
    if (w.user_pref_observed) user["pref"] = topic_name(pref);

    const std::size_t n_hist = w.hist_min + uniform_index(rng, w.hist_max - w.hist_min + 1);
    const std::size_t total = n_hist + w.targets_per_user;
    std::vector<HistoryEntry> timeline;
    std::vector<std::vector<double>> probs;
    for (std::size_t k = 0; k < total; ++k) {
      std::size_t it;
      if (uniform01(rng) < w.pref_rate && !by_topic[pref].empty())
        it = by_topic[pref][uniform_index(rng, by_topic[pref].size())];
      else
        it = uniform_index(rng, n_items);
      const Item& item = items[it];
      const double match = item.topic == pref ? 1.0 : 0.0;
      const double is_fan = fan[item.topic] ? 1.0 : 0.0;
      const double p_follow = clamp01(w.follow_base + w.follow_topic * match + w.follow_fan * is_fan);
      const double p_like = clamp01(w.like_base + w.like_topic * match +
                                    w.like_quality * (item.quality - 0.5) + w.like_fan * is_fan);
      const double p_like_f = clamp01(p_like + w.follow_like_boost);
      const double follow_first = is_fan ? w.follow_first_fan : w.follow_first;

      const bool has_follow = uniform01(rng) < p_follow;
      const bool has_like = uniform01(rng) < (has_follow ? p_like_f : p_like);
      const bool has_forward = uniform01(rng) < w.forward_base;
      const bool has_collect = uniform01(rng) < w.collect_base;
      const bool major_first = uniform01(rng) < w.peak_major;
      const double center = (item.format == 0) == major_first ? w.peak1 : w.peak2;
      const double t_like = truncated_normal(rng, center, w.peak_width);
      const bool f_first = uniform01(rng) < follow_first;
      const double uf = uniform01(rng), ufw = uniform01(rng), uc = uniform01(rng), uw = uniform01(rng);
      const double duration = uniform(rng, w.duration_min, w.duration_max);

      std::vector<std::pair<double, ActionId>> ev;
      if (has_like) ev.push_back({t_like, like});
      if (has_follow) {
        double tf;
        if (!has_like) tf = 0.05 + 0.9 * uf;
        else if (f_first) tf = t_like * (0.2 + 0.7 * uf);
        else tf = t_like + (1.0 - t_like) * (0.1 + 0.7 * uf);
        ev.push_back({tf, follow});
      }
      if (has_forward) ev.push_back({0.05 + 0.9 * ufw, forward});
      if (has_collect) ev.push_back({0.05 + 0.9 * uc, collect});
      std::stable_sort(ev.begin(), ev.end(), [](auto& a, auto& b) { return a.first < b.first; });
      double last = 0.0;
      for (auto& e : ev) last = std::max(last, e.first);
      const double t_leave = std::max(w.watch_min + (1.0 - w.watch_min) * uw, last);

      HistoryEntry h;
      h.item = item_fields(it);
      h.seq.duration_sec = duration;
      h.seq.events.push_back({start, 0.0, 0.0});
      for (auto& [t, a] : ev) h.seq.events.push_back({a, t, t * duration});
      h.seq.events.push_back({leave, t_leave, t_leave * duration});
      h.timestamp = 1.4e9 + 86400.0 * static_cast<double>(u % 97) + 600.0 * static_cast<double>(k);
      timeline.push_back(std::move(h));

      std::vector<double> p(v.num_actions(), 0.0);
      p[start] = 1.0;
      p[leave] = 1.0;
      p[like] = p_follow * p_like_f + (1.0 - p_follow) * p_like;
      p[follow] = p_follow;
      p[forward] = w.forward_base;
      p[collect] = w.collect_base;
      probs.push_back(std::move(p));
    }

    for (std::size_t k = n_hist; k < total; ++k) {
      Sample s;
      s.id = "u" + std::to_string(u) + "-" + std::to_string(k - n_hist);
      s.user = user;
      const std::size_t first = k > w.history_len ? k - w.history_len : 0;
      for (std::size_t j = first; j < k; ++j) s.history.push_back(timeline[j]);
      s.target_item = timeline[k].item;
      s.target_seq = timeline[k].seq;
      s.target_timestamp = timeline[k].timestamp;
      out.samples.push_back(std::move(s));
      out.oracle.push_back(probs[k]);
    }
  }
  return out;
}

void write_oracle(const std::string& path, const SynthData& data, const ActionVocab& vocab) {
  std::ostringstream f;
  f << "id";
  for (const auto& n : vocab.names()) f << "," << n;
  f << "\n";
  f.precision(17);
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    f << data.samples[i].id;
    for (double p : data.oracle[i]) f << "," << p;
    f << "\n";
  }
  write_file_atomic(path, f.str());
}

OracleProbs read_oracle(const std::string& path, const ActionVocab& vocab) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw FormatError(path + ": empty oracle file");
  OracleProbs out;
  for (int no = 2; std::getline(f, line); ++no) {
    if (line.empty()) continue;
    std::istringstream in(line);
    std::string id, cell;
    std::getline(in, id, ',');
    std::vector<double> p;
    while (std::getline(in, cell, ',')) {
      try {
        p.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError(path + ":" + std::to_string(no) + ": bad probability '" + cell + "'");
      }
    }
    if (p.size() != vocab.num_actions())
      throw FormatError(path + ":" + std::to_string(no) + ": expected " +
                        std::to_string(vocab.num_actions()) + " probabilities");
    out[id] = std::move(p);
  }
  return out;
}

double oracle_auc(const std::vector<Sample>& samples, const std::vector<std::vector<double>>& oracle,
                  ActionId action) {
  if (samples.size() != oracle.size()) throw ShapeError("oracle and samples differ in length");
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    scores.push_back(oracle[i].at(action));
    labels.push_back(samples[i].target_seq.contains(action) ? 1 : 0);
  }
  return auc(scores, labels);
}

}  // namespace agn
