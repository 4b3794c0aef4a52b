#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "l2t/factors.hpp"
#include "l2t/inference.hpp"
#include "l2t/rng.hpp"
#include "test_util.hpp"

using namespace l2t;
using testutil::random_matrix;
using testutil::random_orthogonal;

namespace {

Domain make_domain(const Eigen::MatrixXd& features, const char* name) {
  Domain d;
  d.features = features;
  d.name = name;
  return d;
}

ReflectionModel make_model(std::uint64_t seed, double lambda, double mu) {
  ReflectionModel m;
  m.bank = unit_bank();
  m.beta = random_matrix(m.bank.count(), 1, seed).col(0).cwiseAbs() * 0.1;
  m.lambda = lambda;
  m.mu = mu;
  m.bias = 0.2;
  return m;
}

double mmd_term(const InferenceContext& ctx, const Eigen::MatrixXd& w) {
  return ctx.beta.dot(mmd_vector(ctx.xs * w, ctx.xt * w, ctx.bank));
}

}  // namespace

TEST_CASE("objective: identical domains with mu = 0 reduce to the ridge") {
  const Eigen::MatrixXd x = random_matrix(10, 5, 501);
  const Domain source = make_domain(x, "src");
  const Domain target = make_domain(x, "tgt");
  const ReflectionModel model = make_model(502, 0.4, 0.0);
  InferConfig cfg;
  cfg.u = 2;
  cfg.r = 3;
  cfg.gamma2 = 0.25;
  const FactorMatrix w{random_matrix(5, 2, 503)};
  CHECK(objective(w, source, target, model, cfg) ==
        cfg.gamma2 * w.entries.squaredNorm());
  const InferenceContext ctx = make_context(source, target, model, cfg, w);
  CHECK(objective(ctx, w.entries) == cfg.gamma2 * w.entries.squaredNorm());
}

TEST_CASE("objective: invariant under right rotation of W") {
  const Domain source = make_domain(random_matrix(12, 6, 511), "src");
  const Domain target = make_domain(random_matrix(9, 6, 512), "tgt");
  const ReflectionModel model = make_model(513, 0.3, 0.1);
  InferConfig cfg;
  cfg.u = 3;
  cfg.r = 3;
  const FactorMatrix w{random_matrix(6, 3, 514)};
  const Eigen::MatrixXd rot = random_orthogonal(3, 515);

  const InferenceContext ctx = make_context(source, target, model, cfg, w);
  const double a = objective(ctx, w.entries);
  const double b = objective(ctx, w.entries * rot);
  CHECK(std::abs(a - b) <= 1e-8 * std::abs(a));

  const double c = objective(w, source, target, model, cfg);
  const double d =
      objective(FactorMatrix{w.entries * rot}, source, target, model, cfg);
  CHECK(std::abs(c - d) <= 1e-8 * std::abs(c));
}

TEST_CASE("objective: equals the sum of independently computed terms") {
  const Domain source = make_domain(random_matrix(11, 5, 521), "src");
  const Domain target = make_domain(random_matrix(8, 5, 522), "tgt");
  const ReflectionModel model = make_model(523, 0.35, 0.15);
  InferConfig cfg;
  cfg.u = 2;
  cfg.r = 2;
  cfg.gamma2 = 0.05;
  const FactorMatrix w{random_matrix(5, 2, 524)};
  const InferenceContext ctx = make_context(source, target, model, cfg, w);

  const Eigen::MatrixXd zs = ctx.xs * w.entries;
  const Eigen::MatrixXd zt = ctx.xt * w.entries;
  const Eigen::VectorXd d = mmd_vector(zs, zt, ctx.bank);
  const Eigen::MatrixXd q = variance_matrix(zs, zt, ctx.bank, ctx.pairing);
  const Eigen::VectorXd tau = discriminant_vector(ctx.scatter, w);
  const double expected = ctx.beta.dot(d) +
                          ctx.lambda * ctx.beta.dot(q * ctx.beta) +
                          ctx.mu / (ctx.beta.dot(tau) + kEpsilonGuard) +
                          ctx.gamma2 * w.entries.squaredNorm();
  const double got = objective(ctx, w.entries);
  CHECK(std::abs(got - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));
}

TEST_CASE("objective: rejects a non-finite W") {
  const Domain source = make_domain(random_matrix(6, 3, 531), "src");
  const Domain target = make_domain(random_matrix(6, 3, 532), "tgt");
  const ReflectionModel model = make_model(533, 0.0, 0.0);
  InferConfig cfg;
  cfg.u = 2;
  cfg.r = 2;
  const FactorMatrix w{random_matrix(3, 2, 534)};
  const InferenceContext ctx = make_context(source, target, model, cfg, w);
  Eigen::MatrixXd bad = w.entries;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(objective(ctx, bad), std::runtime_error);
}

TEST_CASE("analytic_gradient: identical domains cancel to the ridge gradient") {
  const Eigen::MatrixXd x = random_matrix(9, 4, 541);
  const Domain source = make_domain(x, "src");
  const Domain target = make_domain(x, "tgt");
  const ReflectionModel model = make_model(542, 0.3, 0.0);
  InferConfig cfg;
  cfg.u = 2;
  cfg.r = 3;
  cfg.gamma2 = 0.1;
  const FactorMatrix w{random_matrix(4, 2, 543)};
  const Eigen::MatrixXd grad = analytic_gradient(w, source, target, model, cfg);
  CHECK((grad - 2.0 * cfg.gamma2 * w.entries).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("analytic_gradient: pure ridge term is exact") {
  const Domain source = make_domain(random_matrix(8, 4, 551), "src");
  const Domain target = make_domain(random_matrix(7, 4, 552), "tgt");
  ReflectionModel model;
  model.bank = unit_bank();
  model.beta = Eigen::VectorXd::Zero(model.bank.count());
  model.lambda = 0.0;
  model.mu = 0.0;
  InferConfig cfg;
  cfg.u = 2;
  cfg.r = 2;
  cfg.gamma2 = 0.7;
  const FactorMatrix w{random_matrix(4, 2, 553)};
  const Eigen::MatrixXd grad = analytic_gradient(w, source, target, model, cfg);
  CHECK((grad - 2.0 * cfg.gamma2 * w.entries).norm() == 0.0);
}

TEST_CASE("analytic_gradient: matches central finite differences") {
  const Domain source = make_domain(random_matrix(12, 8, 561), "src");
  const Domain target = make_domain(random_matrix(10, 8, 562), "tgt");
  const ReflectionModel model = make_model(563, 0.4, 0.3);
  InferConfig cfg;
  cfg.u = 3;
  cfg.r = 3;
  cfg.gamma2 = 1e-2;
  const FactorMatrix w{random_matrix(8, 3, 564)};
  CHECK(finite_diff_check(w, source, target, model, cfg, 1e-5) <= 1e-4);
}

TEST_CASE("finite_diff_check: quadratic-only objective is exact") {
  const Domain source = make_domain(random_matrix(7, 4, 571), "src");
  const Domain target = make_domain(random_matrix(6, 4, 572), "tgt");
  ReflectionModel model;
  model.bank = unit_bank();
  model.beta = Eigen::VectorXd::Zero(model.bank.count());
  InferConfig cfg;
  cfg.u = 2;
  cfg.r = 2;
  cfg.gamma2 = 0.3;
  const FactorMatrix w{random_matrix(4, 2, 573)};
  CHECK(finite_diff_check(w, source, target, model, cfg, 1e-5) <= 1e-10);
}

TEST_CASE("finite_diff_check: halving the step shrinks the error quadratically") {
  const Domain source = make_domain(random_matrix(9, 5, 581), "src");
  const Domain target = make_domain(random_matrix(8, 5, 582), "tgt");
  const ReflectionModel model = make_model(583, 0.5, 0.2);
  InferConfig cfg;
  cfg.u = 2;
  cfg.r = 3;
  const FactorMatrix w{random_matrix(5, 2, 584)};
  const double coarse = finite_diff_check(w, source, target, model, cfg, 4e-3);
  const double fine = finite_diff_check(w, source, target, model, cfg, 2e-3);
  REQUIRE(coarse > 0.0);
  REQUIRE(fine > 0.0);
  const double ratio = coarse / fine;
  CHECK(ratio >= 2.0);
  CHECK(ratio <= 8.0);
}

TEST_CASE("infer_w: final objective beats every initialization") {
  const Domain source = make_domain(random_matrix(14, 6, 591), "src");
  const Domain target = make_domain(random_matrix(12, 6, 592), "tgt");
  const ReflectionModel model = make_model(593, 0.3, 0.1);
  InferConfig cfg;
  cfg.u = 2;
  cfg.r = 3;
  cfg.max_iters = 100;
  cfg.restarts = 3;
  cfg.seed = 5;
  const InferResult res = infer_w_detailed(source, target, model, cfg);
  REQUIRE(res.objective_traces.size() == 3);
  for (const std::vector<double>& trace : res.objective_traces) {
    REQUIRE(!trace.empty());
    CHECK(res.objective <= trace.front());
    for (std::size_t i = 1; i < trace.size(); ++i) {
      CHECK(trace[i] <= trace[i - 1]);
    }
  }
  const std::vector<double>& best =
      res.objective_traces[static_cast<std::size_t>(res.winning_restart)];
  CHECK(res.objective == best.back());
  CHECK(res.w.dim() == 6);

  const InferResult again = infer_w_detailed(source, target, model, cfg);
  CHECK((res.w.entries - again.w.entries).norm() == 0.0);
  CHECK(res.objective == again.objective);
}

TEST_CASE("infer_w: heavier ridge shrinks the solution norm") {
  const Domain source = make_domain(random_matrix(15, 6, 601), "src");
  const Domain target = make_domain(random_matrix(15, 6, 602), "tgt");
  // mu > 0 keeps the minimizer away from W = 0, where norms would only
  // measure convergence residue
  const ReflectionModel model = make_model(603, 0.2, 0.05);
  InferConfig cfg;
  cfg.u = 2;
  cfg.r = 3;
  cfg.max_iters = 300;
  cfg.restarts = 2;
  cfg.gamma2 = 1e-2;
  const double light = infer_w(source, target, model, cfg).entries.norm();
  cfg.gamma2 = 1e3;
  const double heavy = infer_w(source, target, model, cfg).entries.norm();
  CHECK(heavy < light);
  CHECK(heavy > 0.0);
}

TEST_CASE("infer_w: planted subspace rotation drives the mmd term down") {
  const Eigen::Index m = 6, u = 2;
  const Eigen::MatrixXd xt = random_matrix(16, m, 611);
  const Eigen::MatrixXd basis = random_proj(m, u, 612).entries;
  const Eigen::MatrixXd rot_u = random_orthogonal(u, 613);
  const Eigen::MatrixXd rot_m =
      Eigen::MatrixXd::Identity(m, m) +
      basis * (rot_u - Eigen::MatrixXd::Identity(u, u)) * basis.transpose();
  const Eigen::MatrixXd xs = xt * rot_m;

  const Domain source = make_domain(xs, "src");
  const Domain target = make_domain(xt, "tgt");
  ReflectionModel model = make_model(614, 0.0, 0.0);
  InferConfig cfg;
  cfg.u = u;
  cfg.r = 3;
  cfg.gamma2 = 1e-3;
  cfg.max_iters = 200;
  cfg.restarts = 3;
  cfg.seed = 9;

  const FactorMatrix w_init = joint_pca(xs, xt, u);
  const InferenceContext ctx = make_context(source, target, model, cfg, w_init);
  const InferResult res = infer_w_detailed(source, target, model, cfg);
  CHECK(mmd_term(ctx, res.w.entries) <= mmd_term(ctx, w_init.entries) + 1e-9);
}

TEST_CASE("infer_w: rejects invalid configurations") {
  const Domain source = make_domain(random_matrix(6, 3, 621), "src");
  const Domain target = make_domain(random_matrix(6, 3, 622), "tgt");
  const ReflectionModel model = make_model(623, 0.0, 0.0);
  InferConfig cfg;
  cfg.u = 4;  // exceeds the feature dimension
  cfg.r = 2;
  CHECK_THROWS_AS(infer_w(source, target, model, cfg), std::invalid_argument);
  cfg.u = 2;
  cfg.restarts = 0;
  CHECK_THROWS_AS(infer_w(source, target, model, cfg), std::invalid_argument);
  cfg.restarts = 2;
  cfg.grad_tol = 0.0;
  CHECK_THROWS_AS(infer_w(source, target, model, cfg), std::invalid_argument);
  cfg.grad_tol = 1e-5;
  cfg.gamma2 = -1.0;
  CHECK_THROWS_AS(infer_w(source, target, model, cfg), std::invalid_argument);
}
