#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "l2t/reflection.hpp"
#include "l2t/rng.hpp"
#include "test_util.hpp"

using namespace l2t;
using testutil::random_matrix;

namespace {

ExperienceFeatures make_feats(const Eigen::VectorXd& d, const Eigen::MatrixXd& q,
                              const Eigen::VectorXd& tau, double target) {
  ExperienceFeatures f;
  f.mmd = d;
  f.variance = q;
  f.discriminant = tau;
  f.inverse_ratio_target = target;
  return f;
}

Eigen::MatrixXd small_psd(Eigen::Index n, std::uint64_t seed, double scale) {
  const Eigen::MatrixXd a = random_matrix(n, n, seed);
  return scale * (a * a.transpose());
}

// the model expression written out longhand
double predict_oracle(const ReflectionModel& m, const ExperienceFeatures& f) {
  double lin = 0.0;
  for (Eigen::Index k = 0; k < m.beta.size(); ++k) lin += m.beta(k) * f.mmd(k);
  double quad = 0.0;
  for (Eigen::Index i = 0; i < m.beta.size(); ++i)
    for (Eigen::Index j = 0; j < m.beta.size(); ++j)
      quad += m.beta(i) * f.variance(i, j) * m.beta(j);
  double denom = 0.0;
  for (Eigen::Index k = 0; k < m.beta.size(); ++k)
    denom += m.beta(k) * f.discriminant(k);
  return lin + m.lambda * quad + m.mu / (denom + kEpsilonGuard) + m.bias;
}

}  // namespace

TEST_CASE("predict_inverse_ratio: bias-only model returns the bias") {
  ReflectionModel m;
  m.beta = Eigen::VectorXd::Zero(3);
  m.bias = 0.7;
  const ExperienceFeatures f = make_feats(
      Eigen::VectorXd::Constant(3, 0.4), small_psd(3, 401, 0.1),
      Eigen::VectorXd::Constant(3, 1.0), 1.0);
  CHECK(predict_inverse_ratio(m, f) == 0.7);
}

TEST_CASE("predict_inverse_ratio: single-kernel arithmetic") {
  ReflectionModel m;
  m.beta = Eigen::VectorXd::Ones(1);
  m.lambda = 1.0;
  Eigen::VectorXd d(1), tau(1);
  d << 0.2;
  tau << 1.0;
  Eigen::MatrixXd q(1, 1);
  q << 0.05;
  CHECK(predict_inverse_ratio(m, make_feats(d, q, tau, 1.0)) ==
        doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("predict_inverse_ratio: matches the longhand expression") {
  ReflectionModel m;
  m.beta = random_matrix(5, 1, 411).col(0).cwiseAbs();
  m.lambda = 0.3;
  m.mu = 0.2;
  m.bias = -0.1;
  const ExperienceFeatures f = make_feats(
      random_matrix(5, 1, 412).col(0).cwiseAbs(), small_psd(5, 413, 0.2),
      random_matrix(5, 1, 414).col(0).cwiseAbs(), 1.0);
  CHECK(predict_inverse_ratio(m, f) ==
        doctest::Approx(predict_oracle(m, f)).epsilon(1e-12));
}

TEST_CASE("predict_inverse_ratio: rejects mismatched dimensions") {
  ReflectionModel m;
  m.beta = Eigen::VectorXd::Zero(3);
  const ExperienceFeatures f = make_feats(
      Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Zero(4, 4),
      Eigen::VectorXd::Ones(4), 1.0);
  CHECK_THROWS_AS(predict_inverse_ratio(m, f), std::invalid_argument);
}

TEST_CASE("huber_loss: closed-form values") {
  CHECK(huber_loss(0.0, 1.0) == 0.0);
  CHECK(huber_loss(2.0, 2.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(huber_loss(3.0, 1.0) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(huber_loss(-3.0, 1.0) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK_THROWS_AS(huber_loss(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(huber_loss(1.0, -2.0), std::invalid_argument);
}

TEST_CASE("huber_loss: convex along random chords") {
  Rng rng(421);
  for (int i = 0; i < 200; ++i) {
    const double r1 = rng.uniform(-6.0, 6.0);
    const double r2 = rng.uniform(-6.0, 6.0);
    const double t = rng.uniform();
    const double lhs = huber_loss(t * r1 + (1.0 - t) * r2, 1.5);
    const double rhs = t * huber_loss(r1, 1.5) + (1.0 - t) * huber_loss(r2, 1.5);
    CHECK(lhs <= rhs + 1e-12);
  }
}

TEST_CASE("huber_grad: matches the piecewise derivative and finite differences") {
  CHECK(huber_grad(0.5, 1.0) == 0.5);
  CHECK(huber_grad(3.0, 1.0) == 1.0);
  CHECK(huber_grad(-3.0, 1.0) == -1.0);
  CHECK(huber_grad(1.0, 1.0) == 1.0);
  for (double r : {-2.7, -0.4, 0.0, 0.9, 4.2}) {
    const double h = 1e-6;
    const double fd = (huber_loss(r + h, 1.3) - huber_loss(r - h, 1.3)) / (2.0 * h);
    CHECK(huber_grad(r, 1.3) == doctest::Approx(fd).epsilon(1e-4));
  }
  CHECK_THROWS_AS(huber_grad(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("correct_ratio: identity cases") {
  CorrectionConfig cfg;
  cfg.enabled = true;
  cfg.b_corr = 0.0;
  CHECK(correct_ratio(1.37, 12, cfg) == 1.37);

  cfg.b_corr = 10.0;
  cfg.p = 7;
  cfg.q = 7;
  CHECK(correct_ratio(1.37, 12, cfg) == 1.37);

  CorrectionConfig off;
  off.enabled = false;
  off.b_corr = 25.0;
  CHECK(correct_ratio(0.9, 5, off) == 0.9);
}

TEST_CASE("correct_ratio: matches the displayed formula") {
  CorrectionConfig cfg;
  cfg.enabled = true;
  cfg.p = 3;
  cfg.q = 120;
  cfg.b_corr = 10.0;
  const double l = 1.1;
  const int n = 15;
  const double expected = l * ((n + cfg.b_corr) / n) *
                          (1.0 - cfg.b_corr / (cfg.q - cfg.p) *
                                     std::log((cfg.q + cfg.b_corr) /
                                              (cfg.p + cfg.b_corr)));
  CHECK(correct_ratio(l, n, cfg) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(correct_ratio(l, n, cfg) > 0.0);
}

TEST_CASE("correct_ratio: rejects invalid arguments") {
  CorrectionConfig cfg;
  cfg.enabled = true;
  cfg.b_corr = 5.0;
  CHECK_THROWS_AS(correct_ratio(0.0, 10, cfg), std::invalid_argument);
  CHECK_THROWS_AS(correct_ratio(-1.0, 10, cfg), std::invalid_argument);
  CHECK_THROWS_AS(correct_ratio(1.0, 0, cfg), std::invalid_argument);
  cfg.b_corr = -1.0;
  CHECK_THROWS_AS(correct_ratio(1.0, 10, cfg), std::invalid_argument);
  cfg.b_corr = 5.0;
  cfg.p = 9;
  cfg.q = 3;
  CHECK_THROWS_AS(correct_ratio(1.0, 10, cfg), std::invalid_argument);
}

TEST_CASE("train_reflection: recovers a planted linear model") {
  const Eigen::Index nk = 5;
  Eigen::VectorXd beta_star(nk);
  beta_star << 0.2, 0.1, 0.0, 0.3, 0.05;
  const double bias_star = 0.4;

  Rng rng(431);
  std::vector<ExperienceFeatures> feats;
  for (int e = 0; e < 60; ++e) {
    Eigen::VectorXd d(nk), tau(nk);
    for (Eigen::Index k = 0; k < nk; ++k) {
      d(k) = rng.uniform(0.0, 2.0);
      tau(k) = rng.uniform(0.5, 2.0);
    }
    const Eigen::MatrixXd q = small_psd(nk, 432 + static_cast<std::uint64_t>(e), 1e-3);
    const double target = beta_star.dot(d) + bias_star;
    feats.push_back(make_feats(d, q, tau, target));
  }

  TrainConfig cfg;
  cfg.gamma1 = 1e-8;
  cfg.max_iters = 4000;
  cfg.seed = 7;
  const TrainResult res = train_reflection_detailed(feats, cfg);

  double mae = 0.0;
  for (const ExperienceFeatures& f : feats) {
    mae += std::abs(predict_inverse_ratio(res.model, f) - f.inverse_ratio_target);
  }
  mae /= static_cast<double>(feats.size());
  CHECK(mae <= 1e-3);

  CHECK(res.model.beta.minCoeff() >= 0.0);
  CHECK(res.model.lambda >= 0.0);
  CHECK(res.model.mu >= 0.0);
}

TEST_CASE("train_reflection: single experience still descends") {
  std::vector<ExperienceFeatures> feats{make_feats(
      Eigen::VectorXd::Constant(3, 0.8), small_psd(3, 441, 0.05),
      Eigen::VectorXd::Constant(3, 1.2), 1.4)};
  TrainConfig cfg;
  cfg.max_iters = 300;
  const TrainResult res = train_reflection_detailed(feats, cfg);
  REQUIRE(!res.objective_traces.empty());
  for (const std::vector<double>& trace : res.objective_traces) {
    REQUIRE(!trace.empty());
    for (std::size_t i = 1; i < trace.size(); ++i) {
      CHECK(trace[i] <= trace[i - 1]);
    }
    CHECK(trace.back() <= trace.front());
  }
  const std::vector<double>& best =
      res.objective_traces[static_cast<std::size_t>(res.winning_restart)];
  CHECK(res.objective == doctest::Approx(best.back()).epsilon(1e-12));
}

TEST_CASE("train_reflection: constant targets are fit by the bias path") {
  std::vector<ExperienceFeatures> feats;
  for (int e = 0; e < 10; ++e) {
    feats.push_back(make_feats(Eigen::VectorXd::Zero(4),
                               Eigen::MatrixXd::Zero(4, 4),
                               Eigen::VectorXd::Constant(4, 1.3), 1.7));
  }
  TrainConfig cfg;
  cfg.gamma1 = 0.0;
  cfg.seed = 3;
  const ReflectionModel model = train_reflection(feats, cfg);
  for (const ExperienceFeatures& f : feats) {
    CHECK(std::abs(predict_inverse_ratio(model, f) - 1.7) <= 1e-6);
  }
}

TEST_CASE("train_reflection: deterministic given the config seed") {
  std::vector<ExperienceFeatures> feats;
  for (int e = 0; e < 6; ++e) {
    feats.push_back(make_feats(
        random_matrix(4, 1, 451 + static_cast<std::uint64_t>(e)).col(0).cwiseAbs(),
        small_psd(4, 461 + static_cast<std::uint64_t>(e), 0.01),
        random_matrix(4, 1, 471 + static_cast<std::uint64_t>(e)).col(0).cwiseAbs(),
        1.0 + 0.05 * e));
  }
  TrainConfig cfg;
  cfg.max_iters = 400;
  cfg.seed = 99;
  const TrainResult a = train_reflection_detailed(feats, cfg);
  const TrainResult b = train_reflection_detailed(feats, cfg);
  CHECK((a.model.beta - b.model.beta).norm() == 0.0);
  CHECK(a.model.lambda == b.model.lambda);
  CHECK(a.model.mu == b.model.mu);
  CHECK(a.model.bias == b.model.bias);
  CHECK(a.objective == b.objective);
  CHECK(a.winning_restart == b.winning_restart);
}

TEST_CASE("train_reflection: rejects degenerate inputs") {
  TrainConfig cfg;
  CHECK_THROWS_AS(train_reflection({}, cfg), std::invalid_argument);

  std::vector<ExperienceFeatures> bad{make_feats(
      Eigen::VectorXd::Constant(2, std::nan("")), Eigen::MatrixXd::Zero(2, 2),
      Eigen::VectorXd::Ones(2), 1.0)};
  CHECK_THROWS_AS(train_reflection(bad, cfg), std::invalid_argument);

  std::vector<ExperienceFeatures> ok{make_feats(
      Eigen::VectorXd::Ones(2), Eigen::MatrixXd::Zero(2, 2),
      Eigen::VectorXd::Ones(2), 1.0)};
  TrainConfig bad_cfg;
  bad_cfg.restarts = 0;
  CHECK_THROWS_AS(train_reflection(ok, bad_cfg), std::invalid_argument);
  std::vector<ExperienceFeatures> mixed = ok;
  mixed.push_back(make_feats(Eigen::VectorXd::Ones(3), Eigen::MatrixXd::Zero(3, 3),
                             Eigen::VectorXd::Ones(3), 1.0));
  CHECK_THROWS_AS(train_reflection(mixed, cfg), std::invalid_argument);
}

TEST_CASE("train_with_correction: disabled search equals plain training") {
  std::vector<ExperienceFeatures> feats;
  std::vector<double> ratios;
  std::vector<int> counts;
  Rng rng(481);
  for (int e = 0; e < 8; ++e) {
    const double ratio = rng.uniform(0.8, 1.6);
    Eigen::VectorXd d(3), tau(3);
    for (Eigen::Index k = 0; k < 3; ++k) {
      d(k) = rng.uniform(0.0, 1.0);
      tau(k) = rng.uniform(0.5, 1.5);
    }
    feats.push_back(make_feats(d, small_psd(3, 491 + static_cast<std::uint64_t>(e), 0.01),
                               tau, 1.0 / ratio));
    ratios.push_back(ratio);
    counts.push_back(3 + (e % 3) * 10);
  }

  TrainConfig cfg;
  cfg.max_iters = 200;
  cfg.restarts = 2;
  cfg.seed = 17;

  CorrectionConfig off;
  off.enabled = false;
  const CorrectionSearchResult plain =
      train_with_correction(feats, ratios, counts, cfg, off);
  const TrainResult direct = train_reflection_detailed(feats, cfg);
  CHECK(plain.b_corr == 0.0);
  CHECK(plain.train.objective == direct.objective);
  CHECK((plain.train.model.beta - direct.model.beta).norm() == 0.0);

  CorrectionConfig on;
  on.enabled = true;
  on.p = 3;
  on.q = 120;
  const CorrectionSearchResult searched =
      train_with_correction(feats, ratios, counts, cfg, on);
  CHECK(searched.train.objective <= plain.train.objective);
  CHECK(searched.b_corr >= 0.0);
  CHECK(searched.b_corr <= 50.0);

  std::vector<double> short_ratios(ratios.begin(), ratios.end() - 1);
  CHECK_THROWS_AS(train_with_correction(feats, short_ratios, counts, cfg, on),
                  std::invalid_argument);
}
