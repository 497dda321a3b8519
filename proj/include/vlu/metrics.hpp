// SPDX-License-Identifier: Apache-2.0
//
// Correlation, classification, and retrieval statistics. All functions are
// pure and thread-safe.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace vlu {

/// LengthMismatch, TooFewSamples (n < 2), ZeroVariance.
double pearson(std::span<const double> xs, std::span<const double> ys);
/// Pearson on average ranks.
double spearman(std::span<const double> xs, std::span<const double> ys);
/// Tie-corrected Kendall tau-b in O(n log n). AllTied when either side has
/// no untied pair.
double kendall_tau_b(std::span<const double> xs, std::span<const double> ys);

/// 1-based ranks; tied values receive the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

using Label = std::string;
using LabelSet = std::vector<Label>;

/// Fraction of predictions contained in their gold set.
/// LengthMismatch, EmptyGold(index), EmptyList.
double accuracy(std::span<const Label> predictions, std::span<const LabelSet> golds);

/// Micro-averaged recall@k: a question hits when its gold, or any label in
/// the same equivalence class, is among the first k ranked labels.
double recall_at_k(std::span<const std::vector<Label>> rankings, std::span<const Label> golds, std::size_t k,
                   std::span<const LabelSet> equivalence = {});

/// Mann-Whitney ROC-AUC; tied positive/negative pairs count 1/2.
/// SingleClass when either class is absent.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Resampled-index statistic: receives n_items indices drawn with replacement.
using ResampleStatistic = std::function<double(std::span<const std::size_t>)>;

/// Percentile bootstrap. Resample b draws its indices from
/// SplitMix64(seed ^ mix64(b + 1)).index(n_items); the interval is the
/// linearly-interpolated ((1-level)/2, 1-(1-level)/2) quantile pair of the
/// sorted resampled statistics.
Interval bootstrap_ci(const ResampleStatistic& statistic, std::size_t n_items, std::size_t n_boot = 200,
                      double level = 0.95, std::uint64_t seed = 0);

/// Linear-interpolation quantile of already sorted data, q in [0, 1].
double sorted_quantile(std::span<const double> sorted, double q);

}  // namespace vlu
