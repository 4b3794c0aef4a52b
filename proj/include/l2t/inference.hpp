#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "l2t/domain.hpp"
#include "l2t/factors.hpp"
#include "l2t/kernels.hpp"
#include "l2t/reflection.hpp"
#include "l2t/stats.hpp"

namespace l2t {

struct InferConfig {
  double gamma2 = 1e-2;
  Eigen::Index u = 2;
  int r = 5;
  int max_iters = 200;
  double grad_tol = 1e-5;
  int restarts = 3;
  std::uint64_t seed = 0;
};

/// Everything held fixed while W moves: the raw rows, the kernel bank frozen
/// at the initialization embedding, the variance pairing drawn once per
/// call, the scatter pairs (raw target rows only), and the trained
/// parameters. Keeping these frozen makes the objective a fixed function of
/// W, so line searches and restarts compare like with like.
struct InferenceContext {
  Eigen::MatrixXd xs;
  Eigen::MatrixXd xt;
  KernelBank bank;
  VariancePairing pairing;
  std::vector<ScatterPair> scatter;
  Eigen::VectorXd beta;
  double lambda = 0.0;
  double mu = 0.0;
  double gamma2 = 0.0;
};

/// Builds the frozen context, deriving kernel bandwidths from the embedding
/// under w_init.
InferenceContext make_context(const Domain& source, const Domain& target,
                              const ReflectionModel& model,
                              const InferConfig& cfg,
                              const FactorMatrix& w_init);

/// beta^T d_W + lambda beta^T Q_W beta + mu / (beta^T tau_W + eps)
/// + gamma2 ||W||_F^2 under the frozen context.
double objective(const InferenceContext& ctx, const Eigen::MatrixXd& w);

/// Exact gradient of objective() with respect to every entry of w; scatter
/// pairs are constants of the context.
Eigen::MatrixXd analytic_gradient(const InferenceContext& ctx,
                                  const Eigen::MatrixXd& w);

/// Convenience forms that freeze the context at the w they are given.
double objective(const FactorMatrix& w, const Domain& source,
                 const Domain& target, const ReflectionModel& model,
                 const InferConfig& cfg);
Eigen::MatrixXd analytic_gradient(const FactorMatrix& w, const Domain& source,
                                  const Domain& target,
                                  const ReflectionModel& model,
                                  const InferConfig& cfg);

struct InferResult {
  FactorMatrix w;
  double objective = 0.0;
  int winning_restart = 0;
  /// Objective after every accepted step per restart; entry 0 is the value
  /// at the initialization.
  std::vector<std::vector<double>> objective_traces;
};

/// Minimizes the objective by Polak-Ribiere nonlinear conjugate gradient
/// with Armijo backtracking; the direction resets to steepest descent every
/// m*u iterations and whenever the conjugate direction stops descending.
/// Initializations: joint_pca plus (restarts - 1) seeded random projections,
/// all scored under one shared context; the lowest final objective wins.
InferResult infer_w_detailed(const Domain& source, const Domain& target,
                             const ReflectionModel& model,
                             const InferConfig& cfg);

FactorMatrix infer_w(const Domain& source, const Domain& target,
                     const ReflectionModel& model, const InferConfig& cfg);

/// Central-difference validation of analytic_gradient under a context frozen
/// at w. Returns the worst relative error over entries with |analytic|
/// > 1e-8 and the worst absolute error elsewhere, whichever is larger.
double finite_diff_check(const FactorMatrix& w, const Domain& source,
                         const Domain& target, const ReflectionModel& model,
                         const InferConfig& cfg, double step);

}  // namespace l2t
