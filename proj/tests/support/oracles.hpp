#pragma once

// Independent reference implementations the library is checked against. They
// favour the most literal formula over speed and share no code with src/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "abfr/anchors.hpp"
#include "abfr/features.hpp"
#include "abfr/kan.hpp"
#include "abfr/rng.hpp"
#include "abfr/train.hpp"
#include "abfr/volume.hpp"

namespace abfr::oracle {

// Single-pass textbook form (n sxy - sx sy) / sqrt((n sxx - sx^2)(n syy - sy^2)),
// accumulated in long double so raw sums of offset signals keep their precision.
inline double pearson_direct(const std::vector<double>& a, const std::vector<double>& b) {
  const long double n = static_cast<long double>(a.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double x = a[i], y = b[i];
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const long double den = std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  return den == 0.0L ? 0.0 : static_cast<double>((n * sxy - sx * sy) / den);
}

// Scalar loop over every edge (i -> j) and knot k.
inline std::vector<double> kan_layer_brute_force(const std::vector<double>& x, std::size_t batch,
                                                 const KanLayer& layer) {
  const auto G = layer.grid.knots.size();
  const double h = layer.grid.width;
  std::vector<double> y(batch * layer.out_dim, 0.0);
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t j = 0; j < layer.out_dim; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < layer.in_dim; ++i) {
        const double xi = x[n * layer.in_dim + i];
        double edge = 0.0;
        if (layer.use_base) edge += layer.base_weight.at(i, j) * (xi / (1.0 + std::exp(-xi)));
        for (std::size_t k = 0; k < G; ++k) {
          const double t = std::tanh((xi - layer.grid.knots[k]) / h);
          edge += layer.coeff(j, i, k) * (1.0 - t * t);
        }
        acc += edge;
      }
      y[n * layer.out_dim + j] = acc;
    }
  return y;
}

// Wins + half ties over all (positive, negative) pairs.
inline double auc_pair_count(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / pairs;
}

// O(N^2) ranks: rank = #smaller + (#equal including itself + 1) / 2.
inline std::vector<double> ranks_by_counting(const std::vector<double>& pooled) {
  std::vector<double> r(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : pooled) {
      less += v < pooled[i];
      equal += v == pooled[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

inline double tie_term(const std::vector<double>& pooled) {
  std::map<double, double> counts;
  for (double v : pooled) counts[v] += 1.0;
  double t = 0.0;
  for (const auto& [v, c] : counts) t += c * c * c - c;
  return t;
}

struct RankSummary {
  std::vector<double> mean_rank;
  std::vector<double> size;
  double n = 0;
  double ties = 0;
};

inline RankSummary rank_summary(const std::vector<std::vector<double>>& groups) {
  std::vector<double> pooled;
  for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
  const auto r = ranks_by_counting(pooled);
  RankSummary s;
  s.n = static_cast<double>(pooled.size());
  s.ties = tie_term(pooled);
  std::size_t at = 0;
  for (const auto& g : groups) {
    double sum = 0;
    for (std::size_t i = 0; i < g.size(); ++i) sum += r[at++];
    s.mean_rank.push_back(sum / static_cast<double>(g.size()));
    s.size.push_back(static_cast<double>(g.size()));
  }
  return s;
}

inline double kruskal_h_brute(const std::vector<std::vector<double>>& groups) {
  const auto s = rank_summary(groups);
  double h = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double d = s.mean_rank[g] - (s.n + 1.0) / 2.0;
    h += s.size[g] * d * d;
  }
  h *= 12.0 / (s.n * (s.n + 1.0));
  const double corr = 1.0 - s.ties / (s.n * s.n * s.n - s.n);
  return corr > 0 ? h / corr : 0.0;
}

inline double dunn_z_brute(const std::vector<std::vector<double>>& groups, std::size_t a, std::size_t b) {
  const auto s = rank_summary(groups);
  const double var = (s.n * (s.n + 1.0) / 12.0 - s.ties / (12.0 * (s.n - 1.0))) * (1.0 / s.size[a] + 1.0 / s.size[b]);
  return (s.mean_rank[a] - s.mean_rank[b]) / std::sqrt(var);
}

struct PermutationP {
  double kruskal = 0.0;
  std::vector<double> dunn;  // pairs in (0,1), (0,2), ..., (1,2), ... order
};

// Shuffles the pooled values over the group slots and counts statistics at
// least as extreme as observed. Ranks are computed once; a shuffle permutes them.
inline PermutationP permutation_p(const std::vector<std::vector<double>>& groups, std::size_t shuffles,
                                  std::uint64_t seed) {
  std::vector<double> pooled;
  std::vector<std::size_t> sizes;
  for (const auto& g : groups) {
    pooled.insert(pooled.end(), g.begin(), g.end());
    sizes.push_back(g.size());
  }
  const double n = static_cast<double>(pooled.size());
  const double ties = tie_term(pooled);
  auto ranks = ranks_by_counting(pooled);
  const std::size_t k = groups.size();

  auto stats = [&](const std::vector<double>& r, double& h, std::vector<double>& z) {
    std::vector<double> mean(k, 0.0);
    std::size_t at = 0;
    for (std::size_t g = 0; g < k; ++g) {
      for (std::size_t i = 0; i < sizes[g]; ++i) mean[g] += r[at++];
      mean[g] /= static_cast<double>(sizes[g]);
    }
    h = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
      const double d = mean[g] - (n + 1.0) / 2.0;
      h += static_cast<double>(sizes[g]) * d * d;
    }
    h *= 12.0 / (n * (n + 1.0)) / (1.0 - ties / (n * n * n - n));
    z.clear();
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) {
        const double var = (n * (n + 1.0) / 12.0 - ties / (12.0 * (n - 1.0))) *
                           (1.0 / static_cast<double>(sizes[a]) + 1.0 / static_cast<double>(sizes[b]));
        z.push_back(std::abs(mean[a] - mean[b]) / std::sqrt(var));
      }
  };

  double h_obs;
  std::vector<double> z_obs;
  stats(ranks, h_obs, z_obs);
  PermutationP p;
  p.dunn.assign(z_obs.size(), 0.0);
  Rng rng(seed);
  double h;
  std::vector<double> z;
  for (std::size_t s = 0; s < shuffles; ++s) {
    for (std::size_t i = ranks.size(); i > 1; --i)
      std::swap(ranks[i - 1], ranks[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    stats(ranks, h, z);
    p.kruskal += h >= h_obs - 1e-12;
    for (std::size_t q = 0; q < z.size(); ++q) p.dunn[q] += z[q] >= z_obs[q] - 1e-12;
  }
  p.kruskal /= static_cast<double>(shuffles);
  for (auto& v : p.dunn) v /= static_cast<double>(shuffles);
  return p;
}

// Per-axis [min, max - p] of the mask's bounding box, found by scanning voxels.
inline std::array<std::pair<std::int64_t, std::int64_t>, 3> start_ranges_brute(const GrayMatterMask& mask,
                                                                                std::size_t p) {
  const auto d = mask.dims();
  std::array<std::int64_t, 3> lo{INT64_MAX, INT64_MAX, INT64_MAX}, hi{-1, -1, -1};
  for (std::size_t x = 0; x < d.x; ++x)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t z = 0; z < d.z; ++z)
        if (mask.at(x, y, z)) {
          const std::int64_t v[3] = {static_cast<std::int64_t>(x), static_cast<std::int64_t>(y),
                                     static_cast<std::int64_t>(z)};
          for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], v[a]);
            hi[a] = std::max(hi[a], v[a]);
          }
        }
  std::array<std::pair<std::int64_t, std::int64_t>, 3> r;
  for (int a = 0; a < 3; ++a) r[a] = {lo[a], hi[a] + 1 - static_cast<std::int64_t>(p)};
  return r;
}

inline std::size_t overlap_brute(const PatchSpec& s, const GrayMatterMask& mask) {
  std::size_t c = 0;
  for (std::size_t x = s.start[0]; x < s.start[0] + s.size; ++x)
    for (std::size_t y = s.start[1]; y < s.start[1] + s.size; ++y)
      for (std::size_t z = s.start[2]; z < s.start[2] + s.size; ++z) c += mask.at(x, y, z);
  return c;
}

// Replays the documented draw order: per attempt x, then y, then z.
inline std::vector<Voxel> random_anchor_trace(const GrayMatterMask& mask, std::size_t p, std::size_t n,
                                              std::size_t tau, std::uint64_t seed) {
  const auto r = start_ranges_brute(mask, p);
  Rng rng(seed);
  std::vector<Voxel> out;
  while (out.size() < n) {
    Voxel v;
    for (int a = 0; a < 3; ++a) v[a] = static_cast<std::size_t>(rng.uniform_int(r[a].first, r[a].second));
    if (overlap_brute({v, p}, mask) >= tau) out.push_back(v);
  }
  return out;
}

// Mean over voxels of the cube that are in the mask, per timepoint.
inline std::vector<double> patch_mean_brute(const FmriVolume& vol, const GrayMatterMask& mask, const PatchSpec& s) {
  std::vector<double> out(vol.timepoints(), 0.0);
  for (std::size_t t = 0; t < vol.timepoints(); ++t) {
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t x = s.start[0]; x < s.start[0] + s.size; ++x)
      for (std::size_t y = s.start[1]; y < s.start[1] + s.size; ++y)
        for (std::size_t z = s.start[2]; z < s.start[2] + s.size; ++z)
          if (mask.at(x, y, z)) {
            sum += vol.at(t, x, y, z);
            ++count;
          }
    out[t] = sum / static_cast<double>(count);
  }
  return out;
}

// Independent replay of one subject's sampling: centers drawn x, y, z from one
// stream, cube start clamped to [0, dim - size], cubes missing the mask redrawn.
struct Replay {
  std::vector<std::vector<double>> fc_per_pass;
  std::vector<PatchSpec> patches;
};

inline Replay replay_sampling(const FmriVolume& vol, const GrayMatterMask& mask, const AnchorSet& anchors, std::size_t n,
                              const std::vector<std::size_t>& sizes, std::uint64_t seed) {
  const auto d = vol.dims();
  std::vector<std::vector<double>> anchor_series;
  for (const auto& a : anchors.anchors) anchor_series.push_back(patch_mean_brute(vol, mask, a));
  Rng rng(seed);
  Replay r;
  for (auto size : sizes) {
    std::vector<double> fc;
    std::size_t kept = 0;
    while (kept < n) {
      PatchSpec s{{}, size};
      for (int a = 0; a < 3; ++a) {
        const auto c = static_cast<std::int64_t>(rng.uniform_int(0, static_cast<std::int64_t>(d[a]) - 1));
        const std::int64_t lo = std::max<std::int64_t>(0, c - static_cast<std::int64_t>(size / 2));
        s.start[a] = static_cast<std::size_t>(std::min<std::int64_t>(lo, static_cast<std::int64_t>(d[a] - size)));
      }
      if (overlap_brute(s, mask) == 0) continue;
      ++kept;
      r.patches.push_back(s);
      const auto sig = patch_mean_brute(vol, mask, s);
      for (const auto& a : anchor_series) fc.push_back(pearson_direct(sig, a));
    }
    r.fc_per_pass.push_back(std::move(fc));
  }
  return r;
}

// flags[row][metric]: 1 best, 2 second best within (sampling, patching, backbone).
inline std::vector<std::map<std::string, int>> argmax_flags(const std::vector<GridRow>& rows) {
  std::vector<std::map<std::string, int>> flags(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& m : kMetricNames) flags[i][m] = 0;
  auto same_block = [&](std::size_t a, std::size_t b) {
    const auto &x = rows[a].cell, &y = rows[b].cell;
    return x.sampling == y.sampling && x.patching == y.patching && x.backbone == y.backbone;
  };
  for (const auto& m : kMetricNames)
    for (std::size_t i = 0; i < rows.size(); ++i) {
      // rows that beat i, or tie with it and come earlier
      std::size_t better = 0;
      for (std::size_t j = 0; j < rows.size(); ++j) {
        if (j == i || !same_block(i, j)) continue;
        const double a = rows[j].summary.at(m).mean, b = rows[i].summary.at(m).mean;
        if (a > b || (a == b && j < i)) ++better;
      }
      if (better == 0) flags[i][m] = 1;
      if (better == 1) flags[i][m] = 2;
    }
  return flags;
}

}  // namespace abfr::oracle
