#include "l2t/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "l2t/rng.hpp"

namespace l2t {

namespace {

constexpr double kArmijoC = 1e-4;
constexpr double kBacktrack = 0.5;
constexpr double kStepInit = 1.0;
constexpr double kMinStep = 1e-30;

void check_config(const InferConfig& cfg) {
  if (!(cfg.gamma2 >= 0.0)) {
    throw std::invalid_argument("gamma2 must be nonnegative");
  }
  if (cfg.u < 1) {
    throw std::invalid_argument("latent dimension must be at least 1");
  }
  if (cfg.r < 1) {
    throw std::invalid_argument("neighbor count must be at least 1");
  }
  if (cfg.max_iters < 1) {
    throw std::invalid_argument("max_iters must be at least 1");
  }
  if (!(cfg.grad_tol > 0.0)) {
    throw std::invalid_argument("grad_tol must be positive");
  }
  if (cfg.restarts < 1) {
    throw std::invalid_argument("restarts must be at least 1");
  }
}

// Entrywise sum_k beta_k * (-2 / delta_k) * exp(-sq / delta_k): the kernel
// derivative weights shared by every pairwise term of the gradient.
Eigen::MatrixXd gram_derivative_weights(const Eigen::MatrixXd& sq,
                                        const KernelBank& bank,
                                        const Eigen::VectorXd& beta) {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(sq.rows(), sq.cols());
  for (std::size_t k = 0; k < bank.count(); ++k) {
    const double b = beta(static_cast<Eigen::Index>(k));
    if (b == 0.0) {
      continue;
    }
    const double delta = bank.bandwidths[k];
    acc += (-2.0 * b / delta) * (-sq / delta).array().exp().matrix();
  }
  return acc;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& x,
                            const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out.row(i) = x.row(rows[static_cast<std::size_t>(i)]);
  }
  return out;
}

struct CgOutcome {
  Eigen::MatrixXd w;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
};

CgOutcome run_cg(const InferenceContext& ctx, Eigen::MatrixXd w,
                 const InferConfig& cfg) {
  CgOutcome out;
  double f = objective(ctx, w);
  Eigen::MatrixXd g = analytic_gradient(ctx, w);
  out.trace.push_back(f);
  Eigen::MatrixXd d = -g;
  const Eigen::Index reset_period = std::max<Eigen::Index>(1, w.size());
  Eigen::Index since_reset = 0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if (g.norm() <= cfg.grad_tol) {
      break;
    }
    double gd = g.cwiseProduct(d).sum();
    if (gd >= 0.0 || since_reset >= reset_period) {
      d = -g;
      gd = -g.squaredNorm();
      since_reset = 0;
    }
    double t = kStepInit;
    bool accepted = false;
    Eigen::MatrixXd w_new;
    double f_new = f;
    while (t >= kMinStep) {
      w_new = w + t * d;
      f_new = objective(ctx, w_new);
      if (f_new <= f + kArmijoC * t * gd) {
        accepted = true;
        break;
      }
      t *= kBacktrack;
    }
    if (!accepted) {
      if (since_reset == 0) {
        break;  // steepest descent makes no representable progress
      }
      d = -g;
      since_reset = 0;
      continue;
    }
    w.swap(w_new);
    f = f_new;
    out.trace.push_back(f);
    Eigen::MatrixXd g_new = analytic_gradient(ctx, w);
    const double denom = g.squaredNorm();
    double pr = denom > 0.0 ? g_new.cwiseProduct(g_new - g).sum() / denom : 0.0;
    pr = std::max(0.0, pr);  // Polak-Ribiere plus
    d = -g_new + pr * d;
    g.swap(g_new);
    ++since_reset;
  }
  out.w = std::move(w);
  out.objective = f;
  return out;
}

}  // namespace

InferenceContext make_context(const Domain& source, const Domain& target,
                              const ReflectionModel& model,
                              const InferConfig& cfg,
                              const FactorMatrix& w_init) {
  source.validate();
  target.validate();
  model.validate();
  check_config(cfg);
  w_init.validate();
  if (source.rows() < 1 || target.rows() < 1) {
    throw std::invalid_argument("both domains must have rows");
  }
  if (source.dim() != target.dim()) {
    throw std::invalid_argument("source and target feature dimensions differ");
  }
  if (w_init.dim() != source.dim()) {
    throw std::invalid_argument("W row count must match the feature dimension");
  }

  InferenceContext ctx;
  ctx.xs = source.features;
  ctx.xt = target.features;
  const Eigen::MatrixXd zs = ctx.xs * w_init.entries;
  const Eigen::MatrixXd zt = ctx.xt * w_init.entries;
  const double eta = mean_energy(zs, zt);
  ctx.bank = model.bank.scaled(eta);
  ctx.pairing = make_variance_pairing(ctx.xs.rows(), ctx.xt.rows(), cfg.seed);
  ctx.scatter = scatter_matrices(ctx.xt, ctx.bank, cfg.r);
  ctx.beta = model.beta;
  ctx.lambda = model.lambda;
  ctx.mu = model.mu;
  ctx.gamma2 = cfg.gamma2;
  return ctx;
}

double objective(const InferenceContext& ctx, const Eigen::MatrixXd& w) {
  if (w.rows() != ctx.xs.cols()) {
    throw std::invalid_argument("W row count must match the feature dimension");
  }
  const Eigen::MatrixXd zs = ctx.xs * w;
  const Eigen::MatrixXd zt = ctx.xt * w;
  const Eigen::VectorXd d = mmd_vector(zs, zt, ctx.bank);
  const Eigen::MatrixXd q = variance_matrix(zs, zt, ctx.bank, ctx.pairing);
  const Eigen::VectorXd tau = discriminant_vector(ctx.scatter, FactorMatrix{w});
  const double value = ctx.beta.dot(d) +
                       ctx.lambda * ctx.beta.dot(q * ctx.beta) +
                       ctx.mu / (ctx.beta.dot(tau) + kEpsilonGuard) +
                       ctx.gamma2 * w.squaredNorm();
  if (!std::isfinite(value)) {
    throw std::runtime_error("objective evaluated to a non-finite value");
  }
  return value;
}

Eigen::MatrixXd analytic_gradient(const InferenceContext& ctx,
                                  const Eigen::MatrixXd& w) {
  if (w.rows() != ctx.xs.cols()) {
    throw std::invalid_argument("W row count must match the feature dimension");
  }
  const Eigen::Index ns = ctx.xs.rows();
  const Eigen::Index nt = ctx.xt.rows();
  const Eigen::Index m = ctx.xs.cols();
  const Eigen::Index total = ns + nt;
  const Eigen::MatrixXd zs = ctx.xs * w;
  const Eigen::MatrixXd zt = ctx.xt * w;

  // Pairwise coefficients over the stacked rows [xs; xt]. Every kernel
  // derivative contributes c_ij (a_i - b_j)^T (a_i - b_j) W; one graph
  // Laplacian turns the accumulated c into the full contraction.
  Eigen::MatrixXd coeff = Eigen::MatrixXd::Zero(total, total);
  coeff.topLeftCorner(ns, ns) =
      gram_derivative_weights(pairwise_sq_dists(zs, zs), ctx.bank, ctx.beta) /
      static_cast<double>(ns * ns);
  coeff.bottomRightCorner(nt, nt) =
      gram_derivative_weights(pairwise_sq_dists(zt, zt), ctx.bank, ctx.beta) /
      static_cast<double>(nt * nt);
  coeff.topRightCorner(ns, nt) =
      gram_derivative_weights(pairwise_sq_dists(zs, zt), ctx.bank, ctx.beta) *
      (-2.0 / static_cast<double>(ns * nt));

  const Eigen::Index n = ctx.pairing.size();
  if (ctx.lambda > 0.0 && n > 1) {
    const Eigen::MatrixXd zs_hat = select_rows(zs, ctx.pairing.source_rows);
    const Eigen::MatrixXd zt_hat = select_rows(zt, ctx.pairing.target_rows);
    const Eigen::MatrixXd dss = pairwise_sq_dists(zs_hat, zs_hat);
    const Eigen::MatrixXd dtt = pairwise_sq_dists(zt_hat, zt_hat);
    const Eigen::MatrixXd dst = pairwise_sq_dists(zs_hat, zt_hat);
    Eigen::MatrixXd gstat = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd ass = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd att = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd ast = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < ctx.bank.count(); ++k) {
      const double b = ctx.beta(static_cast<Eigen::Index>(k));
      if (b == 0.0) {
        continue;
      }
      const double delta = ctx.bank.bandwidths[k];
      const Eigen::MatrixXd ess = (-dss / delta).array().exp();
      const Eigen::MatrixXd ett = (-dtt / delta).array().exp();
      const Eigen::MatrixXd est = (-dst / delta).array().exp();
      gstat += b * (ess + ett - 2.0 * est);
      const double scale = -2.0 * b / delta;
      ass += scale * ess;
      att += scale * ett;
      ast += scale * est;
    }
    const double gbar = gstat.sum() / static_cast<double>(n * n);
    const double outer =
        2.0 * ctx.lambda / (static_cast<double>(n) * static_cast<double>(n) - 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index si = ctx.pairing.source_rows[static_cast<std::size_t>(i)];
      const Eigen::Index ti = ctx.pairing.target_rows[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index sj =
            ctx.pairing.source_rows[static_cast<std::size_t>(j)];
        const Eigen::Index tj =
            ctx.pairing.target_rows[static_cast<std::size_t>(j)];
        const double v = outer * (gstat(i, j) - gbar);
        coeff(si, sj) += v * ass(i, j);
        coeff(ns + ti, ns + tj) += v * att(i, j);
        coeff(si, ns + tj) -= 2.0 * v * ast(i, j);
      }
    }
  }

  Eigen::MatrixXd stacked(total, m);
  stacked << ctx.xs, ctx.xt;
  Eigen::MatrixXd embedded(total, w.cols());
  embedded << zs, zt;
  Eigen::MatrixXd lap = -(coeff + coeff.transpose());
  lap.diagonal() += coeff.rowwise().sum() + coeff.colwise().sum().transpose();
  Eigen::MatrixXd grad = stacked.transpose() * (lap * embedded);

  if (ctx.mu > 0.0) {
    double weighted_tau = 0.0;
    Eigen::MatrixXd mix = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t k = 0; k < ctx.scatter.size(); ++k) {
      const double b = ctx.beta(static_cast<Eigen::Index>(k));
      if (b == 0.0) {
        continue;
      }
      const ScatterPair& sp = ctx.scatter[k];
      const double num = (sp.nonlocal * w).cwiseProduct(w).sum();
      const double den = (sp.local * w).cwiseProduct(w).sum() + kEpsilonGuard;
      weighted_tau += b * num / den;
      mix += (2.0 * b / den) * sp.nonlocal - (2.0 * b * num / (den * den)) * sp.local;
    }
    const double guard = weighted_tau + kEpsilonGuard;
    grad.noalias() += (-ctx.mu / (guard * guard)) * (mix * w);
  }

  grad += 2.0 * ctx.gamma2 * w;
  if (!grad.allFinite()) {
    throw std::runtime_error("gradient evaluated to a non-finite value");
  }
  return grad;
}

double objective(const FactorMatrix& w, const Domain& source,
                 const Domain& target, const ReflectionModel& model,
                 const InferConfig& cfg) {
  const InferenceContext ctx = make_context(source, target, model, cfg, w);
  return objective(ctx, w.entries);
}

Eigen::MatrixXd analytic_gradient(const FactorMatrix& w, const Domain& source,
                                  const Domain& target,
                                  const ReflectionModel& model,
                                  const InferConfig& cfg) {
  const InferenceContext ctx = make_context(source, target, model, cfg, w);
  return analytic_gradient(ctx, w.entries);
}

InferResult infer_w_detailed(const Domain& source, const Domain& target,
                             const ReflectionModel& model,
                             const InferConfig& cfg) {
  check_config(cfg);
  if (cfg.u > source.dim()) {
    throw std::invalid_argument("latent dimension exceeds the feature dimension");
  }
  const FactorMatrix init = joint_pca(source.features, target.features, cfg.u);
  const InferenceContext ctx = make_context(source, target, model, cfg, init);
  const Eigen::Index u_eff = init.latent_dim();

  InferResult result;
  result.objective = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    Eigen::MatrixXd w0 =
        r == 0 ? init.entries
               : random_proj(source.dim(), u_eff,
                             derive_seed(cfg.seed, static_cast<std::uint64_t>(r)))
                     .entries;
    CgOutcome run = run_cg(ctx, std::move(w0), cfg);
    result.objective_traces.push_back(std::move(run.trace));
    if (run.objective < result.objective) {
      result.objective = run.objective;
      result.winning_restart = r;
      result.w.entries = std::move(run.w);
    }
  }
  result.w.validate();
  return result;
}

FactorMatrix infer_w(const Domain& source, const Domain& target,
                     const ReflectionModel& model, const InferConfig& cfg) {
  return infer_w_detailed(source, target, model, cfg).w;
}

double finite_diff_check(const FactorMatrix& w, const Domain& source,
                         const Domain& target, const ReflectionModel& model,
                         const InferConfig& cfg, double step) {
  if (!(step > 0.0)) {
    throw std::invalid_argument("step must be positive");
  }
  const InferenceContext ctx = make_context(source, target, model, cfg, w);
  const Eigen::MatrixXd analytic = analytic_gradient(ctx, w.entries);
  Eigen::MatrixXd probe = w.entries;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < probe.rows(); ++i) {
    for (Eigen::Index j = 0; j < probe.cols(); ++j) {
      const double original = probe(i, j);
      probe(i, j) = original + step;
      const double fp = objective(ctx, probe);
      probe(i, j) = original - step;
      const double fm = objective(ctx, probe);
      probe(i, j) = original;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic(i, j);
      const double err = std::abs(a) > 1e-8 ? std::abs(numeric - a) / std::abs(a)
                                            : std::abs(numeric - a);
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace l2t
