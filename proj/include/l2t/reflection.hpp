#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "l2t/kernels.hpp"
#include "l2t/stats.hpp"

namespace l2t {

/// The learned reflection function in inverse-ratio form:
///   1/f = beta^T d + lambda beta^T Q beta + mu / (beta^T tau) + bias.
/// The bank holds the unit bandwidth grid (energy statistic 1); each pair's
/// own energy statistic rescales it, so kernel indices stay comparable
/// across experiences.
struct ReflectionModel {
  Eigen::VectorXd beta;
  double lambda = 0.0;
  double mu = 0.0;
  double bias = 0.0;
  KernelBank bank;

  void validate() const;
};

struct TrainConfig {
  double gamma1 = 1e-3;
  double huber_delta = 1.0;
  int restarts = 5;
  int max_iters = 2000;
  double step_init = 1.0;
  std::uint64_t seed = 0;
};

/// Maps a raw improvement ratio to its expected value over a labeled-count
/// range [p, q].
struct CorrectionConfig {
  int p = 3;
  int q = 120;
  double b_corr = 0.0;
  bool enabled = false;
};

double predict_inverse_ratio(const ReflectionModel& model,
                             const ExperienceFeatures& feats);

/// 0.5 r^2 inside |r| <= delta, linear with matched value and slope outside.
double huber_loss(double residual, double delta);

/// Derivative of huber_loss in its first argument.
double huber_grad(double residual, double delta);

/// Expected improvement ratio over the labeled-count interval. Returns l
/// unchanged when disabled, when b_corr is zero, or when p equals q.
double correct_ratio(double l, int n_labeled, const CorrectionConfig& cfg);

struct TrainResult {
  ReflectionModel model;
  double objective = 0.0;
  int winning_restart = 0;
  /// Objective value after every accepted step, per restart; index 0 of each
  /// trace is the initial objective.
  std::vector<std::vector<double>> objective_traces;
};

/// Fits (beta, lambda, mu, bias) by projected gradient descent with Armijo
/// backtracking on the Huber objective plus a ridge on the constrained
/// parameters. Best of `restarts` runs: one zero init plus seeded uniform
/// inits in [0, 1/N_k].
TrainResult train_reflection_detailed(
    const std::vector<ExperienceFeatures>& features, const TrainConfig& cfg);

ReflectionModel train_reflection(const std::vector<ExperienceFeatures>& features,
                                 const TrainConfig& cfg);

struct CorrectionSearchResult {
  TrainResult train;
  double b_corr = 0.0;
};

/// Training entry point when the ratio correction is enabled: grid-searches
/// b_corr over {0, 1, ..., 50}, retraining with targets 1/l_hat(b) and
/// keeping the fit with the lowest training objective. ratios and
/// n_labeled run parallel to features; feature targets are rewritten per
/// candidate.
CorrectionSearchResult train_with_correction(
    std::vector<ExperienceFeatures> features, const std::vector<double>& ratios,
    const std::vector<int>& n_labeled, const TrainConfig& cfg,
    const CorrectionConfig& corr);

}  // namespace l2t
