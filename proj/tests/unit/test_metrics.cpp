#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "agn/error.hpp"
#include "agn/hash.hpp"
#include "agn/metrics.hpp"

using namespace agn;

namespace {

// O(n^2) pairwise count, kept in halves so the comparison is exact.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  long long halves = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < s.size(); ++i) (y[i] ? pos : neg)++;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      if (s[i] > s[j]) halves += 2;
      else if (s[i] == s[j]) halves += 1;
    }
  }
  return static_cast<double>(halves) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

void random_instance(std::mt19937_64& rng, std::size_t n, std::vector<double>& s, std::vector<int>& y) {
  s.clear();
  y.clear();
  // coarse grid so that ties are common
  const std::uint64_t levels = 1 + uniform_index(rng, 40);
  for (std::size_t i = 0; i < n; ++i) {
    s.push_back(static_cast<double>(uniform_index(rng, levels)) / 7.0);
    y.push_back(uniform01(rng) < 0.3 ? 1 : 0);
  }
  y[0] = 1;
  y[1] = 0;
}

}  // namespace

TEST_CASE("auc examples") {
  std::vector<double> s = {0.9, 0.8, 0.1};
  std::vector<int> y = {1, 1, 0};
  CHECK(auc(s, y) == 1.0);
  std::vector<double> flat(10, 0.3);
  std::vector<int> mixed = {1, 0, 1, 0, 0, 1, 1, 0, 0, 0};
  CHECK(auc(flat, mixed) == 0.5);
  std::vector<double> rev = {0.1, 0.2, 0.9};
  CHECK(auc(rev, y) == 0.0);
}

TEST_CASE("auc rejects bad input") {
  std::vector<double> s = {0.1, 0.2};
  std::vector<int> ones = {1, 1};
  CHECK_THROWS_AS(auc(s, ones), ValueError);
  std::vector<int> y = {1, 0, 1};
  CHECK_THROWS_AS(auc(s, y), ShapeError);
  std::vector<double> nan = {0.1, std::nan("")};
  std::vector<int> y2 = {1, 0};
  CHECK_THROWS_AS(auc(nan, y2), ValueError);
  try {
    auc(s, ones);
  } catch (const ValueError& e) {
    CHECK(std::string(e.what()).find("positives=2") != std::string::npos);
  }
}

TEST_CASE("auc matches the pairwise count exactly") {
  std::mt19937_64 rng(11);
  std::vector<double> s;
  std::vector<int> y;
  for (int rep = 0; rep < 50; ++rep) {
    random_instance(rng, 2 + uniform_index(rng, 999), s, y);
    CHECK(auc(s, y) == pairwise_auc(s, y));
  }
  random_instance(rng, 1000, s, y);
  CHECK(auc(s, y) == pairwise_auc(s, y));
}

TEST_CASE("property: auc invariant under strictly increasing maps") {
  std::mt19937_64 rng(12);
  std::vector<double> s, t;
  std::vector<int> y;
  for (int rep = 0; rep < 30; ++rep) {
    random_instance(rng, 300, s, y);
    const double a = 0.1 + 3 * uniform01(rng), b = uniform(rng, -2, 2);
    t.clear();
    for (double x : s) t.push_back(std::exp(a * x) + b + std::atan(x));
    CHECK(auc(t, y) == auc(s, y));
  }
}
