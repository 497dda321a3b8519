// SPDX-License-Identifier: Apache-2.0
#include "vlu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vlu/error.hpp"
#include "vlu/hash.hpp"

namespace vlu {
namespace {

void check_pair(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(Errc::LengthMismatch, "correlation inputs differ in length");
  if (xs.size() < 2) throw Error(Errc::TooFewSamples, "correlation needs at least two points");
}

bool equivalent(const Label& a, const Label& b, std::span<const LabelSet> classes) {
  if (a == b) return true;
  for (const auto& cls : classes) {
    const bool has_a = std::find(cls.begin(), cls.end(), a) != cls.end();
    const bool has_b = std::find(cls.begin(), cls.end(), b) != cls.end();
    if (has_a && has_b) return true;
  }
  return false;
}

/// Sum of t(t-1)/2 over runs of equal values in a sorted sequence.
template <typename It, typename Eq>
std::uint64_t tied_pairs(It first, It last, Eq eq) {
  std::uint64_t total = 0;
  while (first != last) {
    It run = first;
    std::uint64_t t = 0;
    while (run != last && eq(*run, *first)) {
      ++run;
      ++t;
    }
    total += t * (t - 1) / 2;
    first = run;
  }
  return total;
}

/// Merge sort `v` ascending, returning the number of strict inversions.
std::uint64_t sort_count_inversions(std::vector<double>& v) {
  std::vector<double> buf(v.size());
  std::uint64_t swaps = 0;
  for (std::size_t width = 1; width < v.size(); width *= 2) {
    for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, v.size());
      const std::size_t hi = std::min(lo + 2 * width, v.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          swaps += mid - i;
          buf[k++] = v[j++];
        } else {
          buf[k++] = v[i++];
        }
      }
      while (i < mid) buf[k++] = v[i++];
      while (j < hi) buf[k++] = v[j++];
    }
    v.swap(buf);
  }
  return swaps;
}

}  // namespace

double pearson(std::span<const double> xs, std::span<const double> ys) {
  check_pair(xs, ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::ZeroVariance, "correlation input has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  check_pair(xs, ys);
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  return pearson(rx, ry);
}

double kendall_tau_b(std::span<const double> xs, std::span<const double> ys) {
  check_pair(xs, ys);
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return xs[a] < xs[b] || (xs[a] == xs[b] && ys[a] < ys[b]);
  });

  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t ties_x =
      tied_pairs(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] == xs[b]; });
  const std::uint64_t ties_xy = tied_pairs(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return xs[a] == xs[b] && ys[a] == ys[b];
  });

  std::vector<double> y_sorted(n);
  for (std::size_t i = 0; i < n; ++i) y_sorted[i] = ys[order[i]];
  const std::uint64_t swaps = sort_count_inversions(y_sorted);
  const std::uint64_t ties_y =
      tied_pairs(y_sorted.begin(), y_sorted.end(), [](double a, double b) { return a == b; });

  if (n0 == ties_x || n0 == ties_y) throw Error(Errc::AllTied, "kendall input is entirely tied");
  const double s = static_cast<double>(n0) - static_cast<double>(ties_x) - static_cast<double>(ties_y) +
                   static_cast<double>(ties_xy) - 2.0 * static_cast<double>(swaps);
  const double denom = std::sqrt(static_cast<double>(n0 - ties_x) * static_cast<double>(n0 - ties_y));
  return std::clamp(s / denom, -1.0, 1.0);
}

double accuracy(std::span<const Label> predictions, std::span<const LabelSet> golds) {
  if (predictions.size() != golds.size()) throw Error(Errc::LengthMismatch, "predictions and golds differ in length");
  if (predictions.empty()) throw Error(Errc::EmptyList, "accuracy of no predictions");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (golds[i].empty()) throw Error(Errc::EmptyGold, "gold set " + std::to_string(i) + " is empty", i);
    if (std::find(golds[i].begin(), golds[i].end(), predictions[i]) != golds[i].end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double recall_at_k(std::span<const std::vector<Label>> rankings, std::span<const Label> golds, std::size_t k,
                   std::span<const LabelSet> equivalence) {
  if (rankings.size() != golds.size()) throw Error(Errc::LengthMismatch, "rankings and golds differ in length");
  if (k < 1) throw Error(Errc::InvalidArgument, "recall@k needs k >= 1");
  if (rankings.empty()) throw Error(Errc::EmptyList, "recall of no questions");
  std::size_t hits = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const auto top = std::min(k, rankings[q].size());
    for (std::size_t r = 0; r < top; ++r) {
      if (equivalent(rankings[q][r], golds[q], equivalence)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::LengthMismatch, "scores and labels differ in length");
  std::size_t positives = 0;
  for (const int y : labels) {
    if (y != 0 && y != 1) throw Error(Errc::InvalidArgument, "labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) throw Error(Errc::SingleClass, "ROC-AUC needs both classes");
  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) rank_sum += ranks[i];
  }
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(Errc::EmptyList, "quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Interval bootstrap_ci(const ResampleStatistic& statistic, std::size_t n_items, std::size_t n_boot, double level,
                      std::uint64_t seed) {
  if (n_items < 1) throw Error(Errc::InvalidArgument, "bootstrap needs at least one item");
  if (n_boot < 1) throw Error(Errc::InvalidArgument, "bootstrap needs at least one resample");
  if (!(level > 0.0 && level < 1.0)) throw Error(Errc::InvalidArgument, "confidence level must be in (0,1)");
  std::vector<double> stats(n_boot);
  std::vector<std::size_t> idx(n_items);
  for (std::size_t b = 0; b < n_boot; ++b) {
    SplitMix64 rng(seed ^ mix64(static_cast<std::uint64_t>(b) + 1));
    for (auto& i : idx) i = static_cast<std::size_t>(rng.index(n_items));
    stats[b] = statistic(idx);
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - level) / 2.0;
  return Interval{sorted_quantile(stats, alpha), sorted_quantile(stats, 1.0 - alpha)};
}

}  // namespace vlu
