#include "l2t/reflection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "l2t/rng.hpp"

namespace l2t {

namespace {

constexpr double kArmijoC = 1e-4;
constexpr double kBacktrack = 0.5;
constexpr double kGradTol = 1e-6;
constexpr double kMinStep = 1e-30;
constexpr int kCorrectionGridMax = 50;

void check_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) {
    throw std::invalid_argument(std::string(what) + " contains a non-finite value");
  }
}

// Training data flattened for stacked evaluation. Row e of `mmd` and
// `discriminant` holds that experience's vectors; `variance` stacks the E
// variance matrices vertically so Q_e beta for every e is one product.
struct Stacked {
  Eigen::MatrixXd mmd;           // E x nk
  Eigen::MatrixXd discriminant;  // E x nk
  Eigen::MatrixXd variance;      // (E*nk) x nk
  Eigen::VectorXd target;        // E
  Eigen::Index nk = 0;
  Eigen::Index count = 0;
};

Stacked stack_features(const std::vector<ExperienceFeatures>& features) {
  if (features.empty()) {
    throw std::invalid_argument("training requires at least one experience");
  }
  Stacked s;
  s.count = static_cast<Eigen::Index>(features.size());
  s.nk = features.front().mmd.size();
  if (s.nk == 0) {
    throw std::invalid_argument("experience features have no kernel entries");
  }
  s.mmd.resize(s.count, s.nk);
  s.discriminant.resize(s.count, s.nk);
  s.variance.resize(s.count * s.nk, s.nk);
  s.target.resize(s.count);
  for (Eigen::Index e = 0; e < s.count; ++e) {
    const ExperienceFeatures& f = features[static_cast<std::size_t>(e)];
    if (f.mmd.size() != s.nk || f.discriminant.size() != s.nk ||
        f.variance.rows() != s.nk || f.variance.cols() != s.nk) {
      throw std::invalid_argument("experience features disagree on kernel count");
    }
    check_finite(f.mmd, "mmd vector");
    check_finite(f.discriminant, "discriminant vector");
    if (!f.variance.allFinite()) {
      throw std::invalid_argument("variance matrix contains a non-finite value");
    }
    if (!std::isfinite(f.inverse_ratio_target)) {
      throw std::invalid_argument("training target is not finite");
    }
    s.mmd.row(e) = f.mmd.transpose();
    s.discriminant.row(e) = f.discriminant.transpose();
    s.variance.middleRows(e * s.nk, s.nk) = f.variance;
    s.target(e) = f.inverse_ratio_target;
  }
  return s;
}

// theta = [beta (nk); lambda; mu; bias]; the first nk + 2 entries are
// constrained nonnegative.
Eigen::VectorXd project(Eigen::VectorXd theta) {
  const Eigen::Index free_index = theta.size() - 1;
  theta.head(free_index) = theta.head(free_index).cwiseMax(0.0);
  return theta;
}

double evaluate(const Stacked& s, const TrainConfig& cfg,
                const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
  const Eigen::Index nk = s.nk;
  const Eigen::Index count = s.count;
  const Eigen::VectorXd beta = theta.head(nk);
  const double lambda = theta(nk);
  const double mu = theta(nk + 1);
  const double bias = theta(nk + 2);

  const Eigen::VectorXd qb_flat = s.variance * beta;  // Q_e beta, stacked
  const Eigen::Map<const Eigen::MatrixXd> qb(qb_flat.data(), nk, count);
  const Eigen::VectorXd quad = qb.transpose() * beta;          // beta^T Q_e beta
  const Eigen::VectorXd tb =
      (s.discriminant * beta).array() + kEpsilonGuard;         // beta^T tau + eps
  const Eigen::VectorXd inv_tb = tb.cwiseInverse();
  const Eigen::VectorXd pred = (s.mmd * beta).array() + lambda * quad.array() +
                               mu * inv_tb.array() + bias;
  const Eigen::VectorXd residual = pred - s.target;

  double loss = 0.0;
  for (Eigen::Index e = 0; e < count; ++e) {
    loss += huber_loss(residual(e), cfg.huber_delta);
  }
  loss += cfg.gamma1 * (beta.squaredNorm() + lambda * lambda + mu * mu);

  if (grad != nullptr) {
    Eigen::VectorXd w(count);
    for (Eigen::Index e = 0; e < count; ++e) {
      w(e) = huber_grad(residual(e), cfg.huber_delta);
    }
    grad->resize(theta.size());
    const Eigen::VectorXd inv_tb2 = inv_tb.cwiseProduct(inv_tb);
    grad->head(nk) = s.mmd.transpose() * w + 2.0 * lambda * (qb * w) -
                     mu * (s.discriminant.transpose() * w.cwiseProduct(inv_tb2)) +
                     2.0 * cfg.gamma1 * beta;
    (*grad)(nk) = w.dot(quad) + 2.0 * cfg.gamma1 * lambda;
    (*grad)(nk + 1) = w.dot(inv_tb) + 2.0 * cfg.gamma1 * mu;
    (*grad)(nk + 2) = w.sum();
  }
  return loss;
}

struct RestartOutcome {
  Eigen::VectorXd theta;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
};

RestartOutcome run_restart(const Stacked& s, const TrainConfig& cfg,
                           Eigen::VectorXd theta) {
  RestartOutcome out;
  Eigen::VectorXd grad;
  double f = evaluate(s, cfg, theta, &grad);
  out.trace.push_back(f);
  double warm_step = cfg.step_init;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if ((theta - project(theta - grad)).norm() <= kGradTol) {
      break;
    }
    double t = std::min(cfg.step_init, 2.0 * warm_step);
    bool accepted = false;
    while (t >= kMinStep) {
      const Eigen::VectorXd cand = project(theta - t * grad);
      const Eigen::VectorXd step = cand - theta;
      const double f_cand = evaluate(s, cfg, cand, nullptr);
      if (std::isfinite(f_cand) && f_cand <= f + kArmijoC * grad.dot(step)) {
        theta = cand;
        f = f_cand;
        warm_step = t;
        accepted = true;
        break;
      }
      t *= kBacktrack;
    }
    if (!accepted) {
      break;  // no descent direction left at representable step sizes
    }
    out.trace.push_back(f);
    f = evaluate(s, cfg, theta, &grad);
  }
  out.theta = theta;
  out.objective = f;
  return out;
}

}  // namespace

void ReflectionModel::validate() const {
  bank.validate();
  if (beta.size() != static_cast<Eigen::Index>(bank.count())) {
    throw std::invalid_argument("beta length does not match the kernel bank");
  }
  check_finite(beta, "beta");
  if (beta.minCoeff() < 0.0) {
    throw std::invalid_argument("beta must be nonnegative");
  }
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw std::invalid_argument("lambda must be finite and nonnegative");
  }
  if (!std::isfinite(mu) || mu < 0.0) {
    throw std::invalid_argument("mu must be finite and nonnegative");
  }
  if (!std::isfinite(bias)) {
    throw std::invalid_argument("bias must be finite");
  }
}

double predict_inverse_ratio(const ReflectionModel& model,
                             const ExperienceFeatures& feats) {
  const Eigen::Index nk = model.beta.size();
  if (feats.mmd.size() != nk || feats.discriminant.size() != nk ||
      feats.variance.rows() != nk || feats.variance.cols() != nk) {
    throw std::invalid_argument("feature dimensions do not match the model");
  }
  const double linear = model.beta.dot(feats.mmd);
  const double quad = model.beta.dot(feats.variance * model.beta);
  const double disc = model.beta.dot(feats.discriminant);
  return linear + model.lambda * quad + model.mu / (disc + kEpsilonGuard) +
         model.bias;
}

double huber_loss(double residual, double delta) {
  if (!(delta > 0.0)) {
    throw std::invalid_argument("huber delta must be positive");
  }
  const double a = std::abs(residual);
  if (a <= delta) {
    return 0.5 * residual * residual;
  }
  return delta * (a - 0.5 * delta);
}

double huber_grad(double residual, double delta) {
  if (!(delta > 0.0)) {
    throw std::invalid_argument("huber delta must be positive");
  }
  if (std::abs(residual) <= delta) {
    return residual;
  }
  return residual > 0.0 ? delta : -delta;
}

double correct_ratio(double l, int n_labeled, const CorrectionConfig& cfg) {
  if (!std::isfinite(l) || l <= 0.0) {
    throw std::invalid_argument("improvement ratio must be positive");
  }
  if (n_labeled < 1) {
    throw std::invalid_argument("labeled count must be at least 1");
  }
  if (!std::isfinite(cfg.b_corr) || cfg.b_corr < 0.0) {
    throw std::invalid_argument("b_corr must be finite and nonnegative");
  }
  if (!cfg.enabled || cfg.b_corr == 0.0) {
    return l;
  }
  if (cfg.p < 1 || cfg.q < cfg.p) {
    throw std::invalid_argument("correction range requires 1 <= p <= q");
  }
  if (cfg.p == cfg.q) {
    return l;
  }
  const double b = cfg.b_corr;
  const double n = static_cast<double>(n_labeled);
  const double p = static_cast<double>(cfg.p);
  const double q = static_cast<double>(cfg.q);
  const double span = 1.0 - b / (q - p) * std::log((q + b) / (p + b));
  return l * ((n + b) / n) * span;
}

TrainResult train_reflection_detailed(
    const std::vector<ExperienceFeatures>& features, const TrainConfig& cfg) {
  if (cfg.restarts < 1) {
    throw std::invalid_argument("restarts must be at least 1");
  }
  if (cfg.max_iters < 0) {
    throw std::invalid_argument("max_iters must be nonnegative");
  }
  if (!(cfg.gamma1 >= 0.0)) {
    throw std::invalid_argument("gamma1 must be nonnegative");
  }
  if (!(cfg.step_init > 0.0)) {
    throw std::invalid_argument("step_init must be positive");
  }
  const Stacked s = stack_features(features);
  const Eigen::Index dim = s.nk + 3;

  TrainResult result;
  result.objective = std::numeric_limits<double>::infinity();
  result.objective_traces.reserve(static_cast<std::size_t>(cfg.restarts));
  Eigen::VectorXd best_theta;
  for (int r = 0; r < cfg.restarts; ++r) {
    Eigen::VectorXd init = Eigen::VectorXd::Zero(dim);
    if (r > 0) {
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(r)));
      const double scale = 1.0 / static_cast<double>(s.nk);
      for (Eigen::Index i = 0; i < dim; ++i) {
        init(i) = scale * rng.uniform();
      }
    }
    RestartOutcome outcome = run_restart(s, cfg, std::move(init));
    result.objective_traces.push_back(std::move(outcome.trace));
    if (outcome.objective < result.objective) {
      result.objective = outcome.objective;
      result.winning_restart = r;
      best_theta = std::move(outcome.theta);
    }
  }

  result.model.beta = best_theta.head(s.nk);
  result.model.lambda = best_theta(s.nk);
  result.model.mu = best_theta(s.nk + 1);
  result.model.bias = best_theta(s.nk + 2);
  result.model.bank = unit_bank();
  if (result.model.bank.count() != static_cast<int>(s.nk)) {
    // synthetic feature sets may carry a smaller kernel grid; keep the same
    // half-exponent spacing so the bank stays strictly increasing
    std::vector<double> exponents(static_cast<std::size_t>(s.nk));
    for (std::size_t i = 0; i < exponents.size(); ++i) {
      exponents[i] = -8.0 + 0.5 * static_cast<double>(i);
    }
    result.model.bank = bank_from_exponents(1.0, exponents);
  }
  result.model.validate();
  return result;
}

ReflectionModel train_reflection(const std::vector<ExperienceFeatures>& features,
                                 const TrainConfig& cfg) {
  return train_reflection_detailed(features, cfg).model;
}

CorrectionSearchResult train_with_correction(
    std::vector<ExperienceFeatures> features, const std::vector<double>& ratios,
    const std::vector<int>& n_labeled, const TrainConfig& cfg,
    const CorrectionConfig& corr) {
  if (features.size() != ratios.size() || features.size() != n_labeled.size()) {
    throw std::invalid_argument(
        "features, ratios and labeled counts must run parallel");
  }
  if (features.empty()) {
    throw std::invalid_argument("training requires at least one experience");
  }

  CorrectionSearchResult best;
  best.train.objective = std::numeric_limits<double>::infinity();
  const int grid_end = corr.enabled ? kCorrectionGridMax : 0;
  for (int b = 0; b <= grid_end; ++b) {
    CorrectionConfig cand = corr;
    cand.b_corr = static_cast<double>(b);
    for (std::size_t e = 0; e < features.size(); ++e) {
      features[e].inverse_ratio_target =
          1.0 / correct_ratio(ratios[e], n_labeled[e], cand);
    }
    TrainResult fit = train_reflection_detailed(features, cfg);
    if (fit.objective < best.train.objective) {
      best.train = std::move(fit);
      best.b_corr = cand.b_corr;
    }
  }
  return best;
}

}  // namespace l2t
