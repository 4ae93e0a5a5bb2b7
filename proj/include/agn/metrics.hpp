#pragma once

#include <span>

namespace agn {

// Mann-Whitney AUC: (#concordant + 0.5 #tied) / (#pos * #neg), O(n log n).
// Throws ValueError naming the class counts when either class is empty.
double auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace agn
