#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"

namespace abfr {

// Average ranks (1-based) of the pooled values; ties share their mean rank.
std::vector<double> average_ranks(std::span<const double> values);

// sum over tie blocks of (t^3 - t).
double tie_sum(std::span<const double> values);

struct KruskalWallisResult {
  double h = 0.0;  // tie-corrected
  double p_value = 1.0;
  std::size_t df = 0;
};

// H = 12 / (N (N + 1)) * sum R_i^2 / n_i - 3 (N + 1), divided by the tie
// correction 1 - sum(t^3 - t) / (N^3 - N); p from chi-square with k - 1 df.
KruskalWallisResult kruskal_wallis(std::span<const std::vector<double>> groups);

struct DunnPair {
  std::size_t a = 0, b = 0;
  double z = 0.0;
  double p_value = 1.0;     // two-sided, normal approximation
  double p_adjusted = 1.0;  // Bonferroni over all pairs, capped at 1
  bool significant = false;  // p_adjusted < alpha
};

// Pairwise z on mean ranks with the tie-corrected variance
//   (N (N + 1) / 12 - sum(t^3 - t) / (12 (N - 1))) (1 / n_a + 1 / n_b).
std::vector<DunnPair> dunn_test(std::span<const std::vector<double>> groups, double alpha = 0.05);

nlohmann::json to_json(const KruskalWallisResult& r);
nlohmann::json to_json(const DunnPair& p);

}  // namespace abfr
