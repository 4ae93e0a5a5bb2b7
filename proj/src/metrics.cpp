#include "agn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "agn/error.hpp"

namespace agn {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  std::size_t pos = 0;
  for (int l : labels) pos += l != 0;
  for (double s : scores)
    if (!std::isfinite(s)) throw ValueError("auc: non-finite score");
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0)
    throw ValueError("auc needs both classes (positives=" + std::to_string(pos) +
                     ", negatives=" + std::to_string(neg) + ")");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Walk tie groups in ascending order; count in integers (twice the credit) so
  // the result is exact.
  unsigned __int128 credit2 = 0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i, p = 0, q = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] != 0 ? p : q) += 1;
      ++j;
    }
    credit2 += static_cast<unsigned __int128>(p) * (2 * neg_below + q);
    neg_below += q;
    i = j;
  }
  return static_cast<double>(credit2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

}  // namespace agn
