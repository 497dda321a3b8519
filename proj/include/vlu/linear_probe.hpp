// SPDX-License-Identifier: Apache-2.0
//
// L2-regularized binary logistic regression on frozen embeddings.
//
// Objective, with labels mapped to {-1, +1} and the bias unregularized:
//   f(w, b) = 0.5 * |w|^2 + C * sum_i log(1 + exp(-y_i (w . x_i + b)))
// minimized by L-BFGS with an Armijo backtracking line search.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vlu/provider.hpp"

namespace vlu {

/// Dense row-major feature matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  /// DimMismatch when rows differ in length.
  static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  FeatureMatrix select(std::span<const std::size_t> rows) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct FitOptions {
  double C = 1.0;
  std::size_t max_iter = 100;
  double tol = 1e-4;
  std::size_t history = 10;
};

inline constexpr std::size_t kGroundabilityMaxIter = 1000;
inline constexpr std::size_t kNliMaxIter = 400;

struct LogRegModel {
  std::vector<double> weights;
  double bias = 0.0;
  double C = 1.0;
  bool converged = false;
  std::size_t iterations = 0;
  /// Objective value after each accepted step (first entry: the start point).
  std::vector<double> objective_trace;
};

/// Objective at `params` = [w..., b]; writes the gradient when `grad` is
/// non-empty (same length as params).
double logreg_objective(const FeatureMatrix& features, std::span<const int> labels, std::span<const double> params,
                        double C, std::span<double> grad = {});

/// SingleClass, NonFiniteFeature, LengthMismatch.
LogRegModel fit(const FeatureMatrix& features, std::span<const int> labels, const FitOptions& options = {});

/// sigma(w . x + b). DimMismatch.
double predict_proba(const LogRegModel& model, std::span<const double> x);
double decision_value(const LogRegModel& model, std::span<const double> x);

/// [e1; e2]. DimMismatch.
std::vector<double> pair_features(const EmbeddingVector& e1, const EmbeddingVector& e2);

/// Fisher-Yates shuffle of 0..n-1 driven by SplitMix64(seed).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

/// Seeded shuffle split into k contiguous folds: fold f holds shuffled
/// positions [f*n/k, (f+1)*n/k). TooFewSamples when n < k.
std::vector<std::vector<std::size_t>> kfold_partition(std::size_t n, std::size_t k, std::uint64_t seed);

struct KFoldResult {
  /// AUC of each evaluated fold, in fold order.
  std::vector<double> fold_auc;
  std::vector<std::size_t> evaluated_folds;
  std::vector<std::string> warnings;
  double mean = 0.0;
  double std = 0.0;
};

/// Per-fold fit on the other folds and ROC-AUC on the held-out fold. Folds
/// lacking a class on either side are skipped with a warning.
KFoldResult kfold_auc(const FeatureMatrix& features, std::span<const int> labels, std::size_t k, std::uint64_t seed,
                      const FitOptions& options = {});

}  // namespace vlu
