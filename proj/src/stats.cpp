#include "abfr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "abfr/errors.hpp"

namespace abfr {

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

double tie_sum(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double s = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    s += t * t * t - t;
    i = j;
  }
  return s;
}

namespace {

struct Pooled {
  std::vector<double> values;
  std::vector<double> ranks;
  std::vector<double> rank_sums;
  std::vector<std::size_t> sizes;
  double n = 0.0;
  double ties = 0.0;
};

Pooled pool(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) throw ValidationError("rank tests need at least 2 groups");
  Pooled p;
  for (const auto& g : groups) {
    if (g.size() < 2) throw ValidationError("every group needs at least 2 samples");
    p.values.insert(p.values.end(), g.begin(), g.end());
    p.sizes.push_back(g.size());
  }
  for (double v : p.values)
    if (!std::isfinite(v)) throw ValidationError("rank tests need finite values");
  p.ranks = average_ranks(p.values);
  p.ties = tie_sum(p.values);
  p.n = static_cast<double>(p.values.size());
  std::size_t offset = 0;
  for (auto size : p.sizes) {
    p.rank_sums.push_back(std::accumulate(p.ranks.begin() + offset, p.ranks.begin() + offset + size, 0.0));
    offset += size;
  }
  return p;
}

}  // namespace

KruskalWallisResult kruskal_wallis(std::span<const std::vector<double>> groups) {
  const auto p = pool(groups);
  KruskalWallisResult r;
  r.df = groups.size() - 1;
  const double correction = 1.0 - p.ties / (p.n * p.n * p.n - p.n);
  if (correction <= 0.0) return r;  // every value tied: no evidence of difference
  double s = 0.0;
  for (std::size_t i = 0; i < p.sizes.size(); ++i) s += p.rank_sums[i] * p.rank_sums[i] / static_cast<double>(p.sizes[i]);
  const double h = 12.0 / (p.n * (p.n + 1.0)) * s - 3.0 * (p.n + 1.0);
  r.h = std::max(0.0, h / correction);
  const boost::math::chi_squared dist(static_cast<double>(r.df));
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.h));
  return r;
}

std::vector<DunnPair> dunn_test(std::span<const std::vector<double>> groups, double alpha) {
  const auto p = pool(groups);
  const std::size_t k = groups.size();
  const double m = static_cast<double>(k * (k - 1) / 2);
  const double base_var = p.n * (p.n + 1.0) / 12.0 - p.ties / (12.0 * (p.n - 1.0));
  const boost::math::normal normal;
  std::vector<DunnPair> out;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      DunnPair d;
      d.a = a;
      d.b = b;
      const double na = static_cast<double>(p.sizes[a]), nb = static_cast<double>(p.sizes[b]);
      const double diff = p.rank_sums[a] / na - p.rank_sums[b] / nb;
      const double se = std::sqrt(base_var * (1.0 / na + 1.0 / nb));
      d.z = se > 0.0 ? diff / se : 0.0;
      d.p_value = se > 0.0 ? 2.0 * boost::math::cdf(boost::math::complement(normal, std::abs(d.z))) : 1.0;
      d.p_adjusted = std::min(1.0, d.p_value * m);
      d.significant = d.p_adjusted < alpha;
      out.push_back(d);
    }
  return out;
}

nlohmann::json to_json(const KruskalWallisResult& r) { return {{"h", r.h}, {"p_value", r.p_value}, {"df", r.df}}; }

nlohmann::json to_json(const DunnPair& p) {
  return {{"a", p.a},         {"b", p.b}, {"z", p.z}, {"p_value", p.p_value}, {"p_adjusted", p.p_adjusted},
          {"significant", p.significant}};
}

}  // namespace abfr
