// SPDX-License-Identifier: Apache-2.0
#include "vlu/linear_probe.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "vlu/error.hpp"
#include "vlu/hash.hpp"
#include "vlu/metrics.hpp"

namespace vlu {
namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (const double x : v) m = std::max(m, std::abs(x));
  return m;
}

void check_inputs(const FeatureMatrix& features, std::span<const int> labels) {
  if (features.rows() != labels.size()) throw Error(Errc::LengthMismatch, "features and labels differ in length");
  bool pos = false, neg = false;
  for (const int y : labels) {
    if (y == 1) pos = true;
    else if (y == 0) neg = true;
    else throw Error(Errc::InvalidArgument, "labels must be 0 or 1");
  }
  if (!pos || !neg) throw Error(Errc::SingleClass, "logistic regression needs both classes");
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (const double x : features.row(r)) {
      if (!std::isfinite(x)) throw Error(Errc::NonFiniteFeature, "non-finite feature in row " + std::to_string(r), r);
    }
  }
}

}  // namespace

FeatureMatrix FeatureMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  FeatureMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols_) throw Error(Errc::DimMismatch, "ragged feature rows", r);
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> rows) const {
  FeatureMatrix m(rows.size(), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = row(rows[i]);
    std::copy(src.begin(), src.end(), m.row(i).begin());
  }
  return m;
}

double logreg_objective(const FeatureMatrix& features, std::span<const int> labels, std::span<const double> params,
                        double C, std::span<double> grad) {
  const std::size_t d = features.cols();
  const auto w = params.first(d);
  const double b = params[d];
  double loss = 0.0;
  for (std::size_t j = 0; j < d; ++j) loss += 0.5 * w[j] * w[j];
  if (!grad.empty()) {
    for (std::size_t j = 0; j < d; ++j) grad[j] = w[j];
    grad[d] = 0.0;
  }
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto x = features.row(i);
    const double y = labels[i] == 1 ? 1.0 : -1.0;
    const double margin = y * (dot(w, x) + b);
    loss += C * softplus(-margin);
    if (!grad.empty()) {
      const double coef = -C * y * sigmoid(-margin);
      for (std::size_t j = 0; j < d; ++j) grad[j] += coef * x[j];
      grad[d] += coef;
    }
  }
  return loss;
}

LogRegModel fit(const FeatureMatrix& features, std::span<const int> labels, const FitOptions& options) {
  check_inputs(features, labels);
  if (!(options.C > 0.0)) throw Error(Errc::InvalidArgument, "C must be positive");
  const std::size_t n_params = features.cols() + 1;

  std::vector<double> theta(n_params, 0.0);
  std::vector<double> grad(n_params);
  std::vector<double> trial(n_params);
  std::vector<double> trial_grad(n_params);
  std::vector<double> dir(n_params);
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  LogRegModel model;
  model.C = options.C;
  double f = logreg_objective(features, labels, theta, options.C, grad);
  model.objective_trace.push_back(f);

  while (true) {
    if (inf_norm(grad) <= options.tol) {
      model.converged = true;
      break;
    }
    if (model.iterations >= options.max_iter) break;

    // Two-loop recursion for dir = -H * grad.
    std::copy(grad.begin(), grad.end(), dir.begin());
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], dir);
      for (std::size_t j = 0; j < n_params; ++j) dir[j] -= alpha[k] * y_hist[k][j];
    }
    if (!s_hist.empty()) {
      const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (auto& v : dir) v *= gamma;
    } else {
      const double scale = 1.0 / std::max(1.0, inf_norm(grad));
      for (auto& v : dir) v *= scale;
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], dir);
      for (std::size_t j = 0; j < n_params; ++j) dir[j] += (alpha[k] - beta) * s_hist[k][j];
    }
    for (auto& v : dir) v = -v;

    double slope = dot(grad, dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      const double scale = 1.0 / std::max(1.0, inf_norm(grad));
      for (std::size_t j = 0; j < n_params; ++j) dir[j] = -grad[j] * scale;
      slope = dot(grad, dir);
    }

    // Armijo backtracking; accepted steps never increase the objective.
    constexpr double kArmijo = 1e-4;
    double step = 1.0;
    double f_new = f;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t j = 0; j < n_params; ++j) trial[j] = theta[j] + step * dir[j];
      f_new = logreg_objective(features, labels, trial, options.C, trial_grad);
      if (std::isfinite(f_new) && f_new <= f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++model.iterations;
    if (!accepted) break;

    std::vector<double> s(n_params), y(n_params);
    for (std::size_t j = 0; j < n_params; ++j) {
      s[j] = trial[j] - theta[j];
      y[j] = trial_grad[j] - grad[j];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * std::max(1.0, dot(y, y))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    theta.swap(trial);
    grad.swap(trial_grad);
    f = f_new;
    model.objective_trace.push_back(f);
  }

  model.weights.assign(theta.begin(), theta.end() - 1);
  model.bias = theta.back();
  return model;
}

double decision_value(const LogRegModel& model, std::span<const double> x) {
  if (x.size() != model.weights.size()) throw Error(Errc::DimMismatch, "feature length differs from model");
  return dot(model.weights, x) + model.bias;
}

double predict_proba(const LogRegModel& model, std::span<const double> x) { return sigmoid(decision_value(model, x)); }

std::vector<double> pair_features(const EmbeddingVector& e1, const EmbeddingVector& e2) {
  if (e1.size() != e2.size()) throw Error(Errc::DimMismatch, "pair embeddings differ in dimension");
  std::vector<double> out;
  out.reserve(e1.size() * 2);
  out.insert(out.end(), e1.begin(), e1.end());
  out.insert(out.end(), e2.begin(), e2.end());
  return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  SplitMix64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.index(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

std::vector<std::vector<std::size_t>> kfold_partition(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(Errc::InvalidArgument, "k-fold needs k >= 2");
  if (n < k) throw Error(Errc::TooFewSamples, "fewer samples than folds");
  const auto order = shuffled_indices(n, seed);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(f * n / k),
                    order.begin() + static_cast<std::ptrdiff_t>((f + 1) * n / k));
  }
  return folds;
}

KFoldResult kfold_auc(const FeatureMatrix& features, std::span<const int> labels, std::size_t k, std::uint64_t seed,
                      const FitOptions& options) {
  if (features.rows() != labels.size()) throw Error(Errc::LengthMismatch, "features and labels differ in length");
  const auto folds = kfold_partition(labels.size(), k, seed);
  KFoldResult result;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> train;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
    }
    auto has_both = [&](const std::vector<std::size_t>& idx) {
      bool pos = false, neg = false;
      for (const auto i : idx) (labels[i] == 1 ? pos : neg) = true;
      return pos && neg;
    };
    if (!has_both(folds[f]) || !has_both(train)) {
      result.warnings.push_back("fold " + std::to_string(f) + " skipped: a class is missing");
      continue;
    }
    std::vector<int> train_labels;
    for (const auto i : train) train_labels.push_back(labels[i]);
    const auto model = fit(features.select(train), train_labels, options);
    std::vector<double> scores;
    std::vector<int> test_labels;
    for (const auto i : folds[f]) {
      scores.push_back(decision_value(model, features.row(i)));
      test_labels.push_back(labels[i]);
    }
    result.fold_auc.push_back(roc_auc(scores, test_labels));
    result.evaluated_folds.push_back(f);
  }
  if (!result.fold_auc.empty()) {
    const double n = static_cast<double>(result.fold_auc.size());
    result.mean = std::accumulate(result.fold_auc.begin(), result.fold_auc.end(), 0.0) / n;
    if (result.fold_auc.size() > 1) {
      double ss = 0.0;
      for (const double a : result.fold_auc) ss += (a - result.mean) * (a - result.mean);
      result.std = std::sqrt(ss / (n - 1.0));
    }
  }
  return result;
}

}  // namespace vlu
