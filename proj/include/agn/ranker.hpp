#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "agn/domain.hpp"
#include "agn/kvconfig.hpp"

namespace agn {

struct PeakModel {
  std::size_t bins = 0;
  std::size_t smooth_width = 0;
  std::vector<double> histogram;  // sums to 1
  std::vector<double> smoothed;
  std::vector<std::size_t> peak_bins;
  std::vector<double> centers;  // bin centers of the peaks
  double half_width = 0.0;      // smooth_width bins, in timing units

  bool near_peak(double t) const;
};

// Histogram over [0, 1] -> centered moving average of width w bins (truncated at
// the edges) -> maxima strictly above both neighbours and above 1.2x the mean
// density. A run of equal values bounded by strictly lower neighbours counts as
// one maximum located at its middle bin. Requires >= 100 observations.
PeakModel detect_peaks(std::span<const double> timings, std::size_t bins, std::size_t smooth_width);

using PeakModels = std::map<ActionId, PeakModel>;

// One peak model per action other than Start/Leave, fitted on the timings of
// the given sequences; actions with fewer than 100 observations are left out.
PeakModels fit_peak_models(std::span<const ActionSequence> seqs, const ActionVocab& vocab, std::size_t bins,
                           std::size_t smooth_width);

struct BoostPolicy {
  double lambda_t = 0.0;  // late Like
  double lambda_s = 0.0;  // Follow before Like
  double lambda_p = 0.0;  // near-peak timings
  double late_threshold = 0.5;
  std::size_t bins = 50;
  std::size_t smooth_width = 2;

  void validate() const;
  static BoostPolicy from_kv(const KvConfig& kv);
};

struct BoostFactors {
  double late = 1.0;
  double sequence = 1.0;
  double peak = 1.0;
};

// score = base * (1 + lt * max(0, t_Like - threshold) [Like decoded])
//              * (1 + ls [Follow decoded before Like])
//              * (1 + lp * fraction of decoded non-Start/Leave actions near a peak)
double adjust_score(double base, const ActionSequence& decoded, const ActionVocab& vocab,
                    const PeakModels& peaks, const BoostPolicy& policy, BoostFactors* factors = nullptr);

struct Candidate {
  std::string id;
  double base = 0.0;
  ActionSequence decoded;
};

struct RankedItem {
  std::size_t rank = 0;  // 1-based
  std::string id;
  double base = 0.0;
  double adjusted = 0.0;
  BoostFactors factors;
};

// Adjusted score descending, ties by id ascending. Ids must be unique.
std::vector<RankedItem> rank_candidates(const std::vector<Candidate>& candidates,
                                        const ActionVocab& vocab, const PeakModels& peaks,
                                        const BoostPolicy& policy);

std::string ranking_csv(const std::vector<RankedItem>& ranked);

}  // namespace agn
