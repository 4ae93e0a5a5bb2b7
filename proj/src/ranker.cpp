#include "agn/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "agn/error.hpp"

namespace agn {

bool PeakModel::near_peak(double t) const {
  for (double c : centers)
    if (std::fabs(t - c) <= half_width + 1e-12) return true;
  return false;
}

PeakModel detect_peaks(std::span<const double> timings, std::size_t bins, std::size_t smooth_width) {
  if (timings.size() < 100)
    throw ValueError("peak detection needs >= 100 observations, got " + std::to_string(timings.size()));
  if (bins < 3) throw ValueError("peak detection needs >= 3 bins");
  if (smooth_width == 0) throw ValueError("smooth_width must be >= 1");
  PeakModel m;
  m.bins = bins;
  m.smooth_width = smooth_width;
  m.histogram.assign(bins, 0.0);
  for (double t : timings) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValueError("timings must lie in [0, 1]");
    m.histogram[std::min(bins - 1, static_cast<std::size_t>(t * static_cast<double>(bins)))] += 1.0;
  }
  for (double& h : m.histogram) h /= static_cast<double>(timings.size());

  // window [i - lo, i + hi] with lo + hi + 1 == smooth_width
  const std::size_t lo = (smooth_width - 1) / 2, hi = smooth_width / 2;
  m.smoothed.assign(bins, 0.0);
  for (std::size_t i = 0; i < bins; ++i) {
    const std::size_t a = i >= lo ? i - lo : 0, b = std::min(bins - 1, i + hi);
    double s = 0;
    for (std::size_t j = a; j <= b; ++j) s += m.histogram[j];
    m.smoothed[i] = s / static_cast<double>(b - a + 1);
  }

  const double threshold = 1.2 / static_cast<double>(bins);
  for (std::size_t i = 0; i < bins;) {
    std::size_t j = i;
    while (j + 1 < bins && m.smoothed[j + 1] == m.smoothed[i]) ++j;
    const bool left = i == 0 || m.smoothed[i - 1] < m.smoothed[i];
    const bool right = j + 1 == bins || m.smoothed[j + 1] < m.smoothed[i];
    if (left && right && m.smoothed[i] > threshold) m.peak_bins.push_back((i + j) / 2);
    i = j + 1;
  }
  for (std::size_t p : m.peak_bins) m.centers.push_back((static_cast<double>(p) + 0.5) / static_cast<double>(bins));
  m.half_width = static_cast<double>(smooth_width) / static_cast<double>(bins);
  return m;
}

void BoostPolicy::validate() const {
  for (auto [k, v] : {std::pair{"lambda_t", lambda_t}, {"lambda_s", lambda_s}, {"lambda_p", lambda_p}})
    if (!std::isfinite(v) || v < 0) throw ConfigError(k, std::string(k) + " must be finite and >= 0");
  if (!(late_threshold >= 0 && late_threshold <= 1))
    throw ConfigError("late_threshold", "late_threshold must lie in [0, 1]");
  if (bins < 3) throw ConfigError("bins", "bins must be >= 3");
  if (smooth_width == 0) throw ConfigError("smooth_width", "smooth_width must be >= 1");
}

BoostPolicy BoostPolicy::from_kv(const KvConfig& kv) {
  BoostPolicy p;
  kv.read("lambda_t", p.lambda_t);
  kv.read("lambda_s", p.lambda_s);
  kv.read("lambda_p", p.lambda_p);
  kv.read("late_threshold", p.late_threshold);
  kv.read("bins", p.bins);
  kv.read("smooth_width", p.smooth_width);
  kv.reject_unknown();
  p.validate();
  return p;
}

double adjust_score(double base, const ActionSequence& decoded, const ActionVocab& vocab,
                    const PeakModels& peaks, const BoostPolicy& policy, BoostFactors* factors) {
  if (!(base > 0) || !std::isfinite(base)) throw ValueError("base score must be finite and > 0");
  BoostFactors f;
  const auto like = vocab.find("Like"), follow = vocab.find("Follow");
  std::optional<std::size_t> like_pos = like ? decoded.position(*like) : std::nullopt;
  std::optional<std::size_t> follow_pos = follow ? decoded.position(*follow) : std::nullopt;
  if (like_pos)
    f.late = 1.0 + policy.lambda_t *
                       std::max(0.0, decoded.events[*like_pos].timing_norm - policy.late_threshold);
  if (like_pos && follow_pos && *follow_pos < *like_pos) f.sequence = 1.0 + policy.lambda_s;
  std::size_t timed = 0, near = 0;
  for (const ActionEvent& e : decoded.events) {
    if (e.action == vocab.start() || e.action == vocab.leave()) continue;
    ++timed;
    auto it = peaks.find(e.action);
    if (it != peaks.end() && it->second.near_peak(e.timing_norm)) ++near;
  }
  if (timed > 0) f.peak = 1.0 + policy.lambda_p * static_cast<double>(near) / static_cast<double>(timed);
  if (factors) *factors = f;
  return base * f.late * f.sequence * f.peak;
}

std::vector<RankedItem> rank_candidates(const std::vector<Candidate>& candidates,
                                        const ActionVocab& vocab, const PeakModels& peaks,
                                        const BoostPolicy& policy) {
  std::set<std::string> ids;
  std::vector<RankedItem> out;
  for (const Candidate& c : candidates) {
    if (!ids.insert(c.id).second) throw ValueError("duplicate candidate id '" + c.id + "'");
    RankedItem r;
    r.id = c.id;
    r.base = c.base;
    r.adjusted = adjust_score(c.base, c.decoded, vocab, peaks, policy, &r.factors);
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.adjusted != b.adjusted) return a.adjusted > b.adjusted;
    return a.id < b.id;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

PeakModels fit_peak_models(std::span<const ActionSequence> seqs, const ActionVocab& vocab, std::size_t bins,
                           std::size_t smooth_width) {
  std::map<ActionId, std::vector<double>> timings;
  for (const ActionSequence& s : seqs)
    for (const ActionEvent& e : s.events)
      if (e.action != vocab.start() && e.action != vocab.leave()) timings[e.action].push_back(e.timing_norm);
  PeakModels out;
  for (const auto& [a, ts] : timings)
    if (ts.size() >= 100) out[a] = detect_peaks(ts, bins, smooth_width);
  return out;
}

std::string ranking_csv(const std::vector<RankedItem>& ranked) {
  std::ostringstream o;
  o.precision(17);
  o << "rank,id,base,adjusted,late_factor,sequence_factor,peak_factor\n";
  for (const RankedItem& r : ranked)
    o << r.rank << "," << r.id << "," << r.base << "," << r.adjusted << "," << r.factors.late << ","
      << r.factors.sequence << "," << r.factors.peak << "\n";
  return o.str();
}

}  // namespace agn
