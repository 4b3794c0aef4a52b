// Command-line front end for the transfer-experience pipeline: generate
// synthetic experience stores, featurize them, train the reflection
// function, infer factor matrices for new pairs, and evaluate against the
// base extractors.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "l2t/inference.hpp"
#include "l2t/io.hpp"
#include "l2t/pipeline.hpp"
#include "l2t/reflection.hpp"
#include "l2t/rng.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    const std::string token = comma == std::string::npos
                                  ? s.substr(start)
                                  : s.substr(start, comma - start);
    const std::size_t a = token.find_first_not_of(" \t");
    if (a == std::string::npos) {
      out.push_back("");
    } else {
      const std::size_t b = token.find_last_not_of(" \t");
      out.push_back(token.substr(a, b - a + 1));
    }
    if (comma == std::string::npos) {
      break;
    }
    start = comma + 1;
  }
  return out;
}

std::vector<l2t::ExtractorId> parse_extractors(const std::string& csv) {
  std::vector<l2t::ExtractorId> out;
  for (const std::string& token : split_csv(csv)) {
    out.push_back(l2t::extractor_from_string(token));
  }
  return out;
}

std::vector<int> parse_ints(const std::string& csv) {
  std::vector<int> out;
  for (const std::string& token : split_csv(csv)) {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used != token.size()) {
      throw std::invalid_argument("not an integer: '" + token + "'");
    }
    out.push_back(v);
  }
  return out;
}

int run_grad_check(std::uint64_t seed, int trials, double step, double tol) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t child = l2t::derive_seed(seed, static_cast<std::uint64_t>(t));
    l2t::Rng rng(child);
    l2t::SynthConfig synth;
    synth.m = 6 + static_cast<Eigen::Index>(rng.bounded(7));  // 6..12
    synth.u_true = 2 + static_cast<Eigen::Index>(rng.bounded(2));
    synth.classes_per_domain = 3;
    synth.samples_per_class = 3 + static_cast<int>(rng.bounded(3));
    synth.relatedness = rng.uniform(0.3, 1.0);
    synth.noise_sigma = rng.uniform(0.05, 0.4);
    synth.seed = l2t::derive_seed(child, 1);
    auto [source, target] = l2t::gen_pair(synth);

    l2t::ReflectionModel model;
    model.bank = l2t::unit_bank();
    const Eigen::Index nk = static_cast<Eigen::Index>(model.bank.count());
    model.beta.resize(nk);
    for (Eigen::Index k = 0; k < nk; ++k) {
      model.beta(k) = rng.uniform(0.01, 1.0 / static_cast<double>(nk));
    }
    model.lambda = rng.uniform(0.1, 1.0);
    model.mu = rng.uniform(0.1, 1.0);
    model.bias = rng.uniform(-1.0, 1.0);

    l2t::InferConfig cfg;
    cfg.gamma2 = rng.uniform(0.0, 1.0);
    const Eigen::Index u = 1 + static_cast<Eigen::Index>(
                                   rng.bounded(static_cast<std::uint64_t>(
                                       std::min<Eigen::Index>(4, synth.m))));
    cfg.u = u;
    cfg.r = 3;
    cfg.seed = l2t::derive_seed(child, 2);

    l2t::FactorMatrix w;
    w.entries = 0.5 * rng.gaussian(synth.m, u);
    const double err =
        l2t::finite_diff_check(w, source, target, model, cfg, step);
    worst = std::max(worst, err);
  }
  std::cout << "max relative error = " << l2t::io::format_double(worst)
            << " over " << trials << " trials (step "
            << l2t::io::format_double(step) << ")\n";
  return worst > tol ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learning-to-transfer pipeline"};
  app.require_subcommand(1);

  // gen
  int gen_n = 0;
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  l2t::SynthConfig synth;
  std::string gen_extractors = "joint_pca,target_pca,tca_lite,random_proj,kpca_recover";
  std::string gen_n_labeled = "3,15";
  auto* gen = app.add_subcommand("gen", "generate a synthetic experience store");
  gen->add_option("--n", gen_n, "number of experiences")->required();
  gen->add_option("--out", gen_out, "output store directory")->required();
  gen->add_option("--seed", gen_seed, "master seed")->required();
  gen->add_option("--m", synth.m, "ambient feature dimension")->required();
  gen->add_option("--u-true", synth.u_true, "latent dimension of the generator")
      ->required();
  gen->add_option("--relatedness", synth.relatedness,
                  "shared fraction of latent directions in [0, 1]")
      ->required();
  gen->add_option("--noise", synth.noise_sigma, "ambient noise sigma")->required();
  gen->add_option("--extractors", gen_extractors, "csv list of base extractors");
  gen->add_option("--n-labeled", gen_n_labeled, "csv list of labeled budgets");
  gen->add_option("--classes", synth.classes_per_domain, "classes per domain");
  gen->add_option("--samples", synth.samples_per_class, "samples per class");

  // featurize
  std::string feat_store;
  std::string feat_out;
  int feat_r = 5;
  bool feat_correct = false;
  l2t::CorrectionConfig correction;
  auto* feat = app.add_subcommand("featurize", "compute experience features");
  feat->add_option("--store", feat_store, "experience store directory")->required();
  feat->add_option("--out", feat_out, "output feature directory")->required();
  feat->add_option("--r", feat_r, "neighbor count for the scatter matrices")
      ->required();
  feat->add_flag("--correct", feat_correct, "enable the ratio correction");
  feat->add_option("--p", correction.p, "lower end of the labeled-count range");
  feat->add_option("--q", correction.q, "upper end of the labeled-count range");

  // train
  std::string train_features;
  std::string train_out;
  l2t::TrainConfig train_cfg;
  auto* train = app.add_subcommand("train", "fit the reflection function");
  train->add_option("--features", train_features, "feature directory")->required();
  train->add_option("--out", train_out, "output model directory")->required();
  train->add_option("--gamma1", train_cfg.gamma1, "ridge weight")->required();
  train->add_option("--huber-delta", train_cfg.huber_delta, "huber threshold")
      ->required();
  train->add_option("--restarts", train_cfg.restarts, "optimizer restarts")
      ->required();
  train->add_option("--seed", train_cfg.seed, "restart seed")->required();
  train->add_option("--max-iters", train_cfg.max_iters, "iteration cap");

  // infer
  std::string infer_model;
  std::string infer_pair;
  std::string infer_out;
  l2t::InferConfig infer_cfg;
  auto* infer = app.add_subcommand("infer", "infer W for a stored pair");
  infer->add_option("--model", infer_model, "model directory")->required();
  infer->add_option("--pair", infer_pair, "pair directory")->required();
  infer->add_option("--u", infer_cfg.u, "latent dimension")->required();
  infer->add_option("--gamma2", infer_cfg.gamma2, "W complexity weight")
      ->required();
  infer->add_option("--r", infer_cfg.r, "neighbor count")->required();
  infer->add_option("--out", infer_out, "output W matrix file")->required();
  infer->add_option("--seed", infer_cfg.seed, "inference seed")->required();
  infer->add_option("--restarts", infer_cfg.restarts, "optimizer restarts");
  infer->add_option("--max-iters", infer_cfg.max_iters, "iteration cap");
  infer->add_option("--grad-tol", infer_cfg.grad_tol, "gradient stopping norm");

  // eval
  std::string eval_model;
  std::string eval_pairs;
  int eval_n_labeled = 3;
  std::string eval_report;
  l2t::InferConfig eval_cfg;
  eval_cfg.u = 5;
  auto* eval = app.add_subcommand("eval", "compare inferred W against the bases");
  eval->add_option("--model", eval_model, "model directory")->required();
  eval->add_option("--test-pairs", eval_pairs,
                   "store directory or directory of pair_* subdirectories")
      ->required();
  eval->add_option("--n-labeled", eval_n_labeled, "labeled budget per pair")
      ->required();
  eval->add_option("--report", eval_report, "output report file")->required();
  eval->add_option("--u", eval_cfg.u, "latent dimension for inference");
  eval->add_option("--gamma2", eval_cfg.gamma2, "W complexity weight");
  eval->add_option("--r", eval_cfg.r, "neighbor count");
  eval->add_option("--seed", eval_cfg.seed, "evaluation seed");
  eval->add_option("--restarts", eval_cfg.restarts, "optimizer restarts");
  eval->add_option("--max-iters", eval_cfg.max_iters, "iteration cap");

  // grad-check
  std::uint64_t check_seed = 0;
  int check_trials = 20;
  double check_step = 1e-5;
  double check_tol = 1e-4;
  auto* check = app.add_subcommand("grad-check",
                                   "validate the analytic gradient numerically");
  check->add_option("--seed", check_seed, "instance seed")->required();
  check->add_option("--trials", check_trials, "number of random instances")
      ->required();
  check->add_option("--step", check_step, "central-difference step");
  check->add_option("--tol", check_tol, "failure threshold");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      synth.seed = gen_seed;
      const auto store = l2t::generate_experiences(
          gen_n, parse_extractors(gen_extractors), synth,
          parse_ints(gen_n_labeled), gen_seed);
      l2t::save_store(gen_out, store);
      std::cout << "wrote " << store.experiences.size() << " experiences to "
                << gen_out << "\n";
    } else if (feat->parsed()) {
      const auto store = l2t::load_store(feat_store);
      l2t::FeatureSet fs = l2t::featurize_store(store, feat_r);
      correction.enabled = feat_correct;
      fs.correction = correction;
      l2t::save_feature_set(feat_out, fs);
      std::cout << "wrote features for " << fs.features.size()
                << " experiences to " << feat_out << "\n";
    } else if (train->parsed()) {
      const l2t::FeatureSet fs = l2t::load_feature_set(train_features);
      const l2t::CorrectionSearchResult fit = l2t::train_with_correction(
          fs.features, fs.ratios, fs.n_labeled, train_cfg, fs.correction);
      l2t::ModelArtifacts art;
      art.model = fit.train.model;
      art.b_corr = fit.b_corr;
      art.objective = fit.train.objective;
      art.winning_restart = fit.train.winning_restart;
      l2t::save_model(train_out, art);
      std::cout << "trained on " << fs.features.size()
                << " experiences, objective "
                << l2t::io::format_double(art.objective) << ", wrote "
                << train_out << "\n";
    } else if (infer->parsed()) {
      const l2t::ModelArtifacts art = l2t::load_model(infer_model);
      const auto [source, target] = l2t::load_pair(infer_pair);
      const l2t::FactorMatrix w =
          l2t::infer_w(source, target, art.model, infer_cfg);
      l2t::io::save_matrix(infer_out, w.entries);
      std::cout << "wrote " << w.dim() << " x " << w.latent_dim() << " W to "
                << infer_out << "\n";
    } else if (eval->parsed()) {
      const l2t::ModelArtifacts art = l2t::load_model(eval_model);
      const auto pairs = l2t::load_test_pairs(eval_pairs);
      const l2t::EvalReport report =
          l2t::evaluate_l2t(l2t::ExperienceStore{}, art.model, pairs,
                            l2t::all_extractors(), eval_n_labeled, eval_cfg);
      l2t::save_report(eval_report, report);
      std::cout << "evaluated " << pairs.size() << " pairs, wrote "
                << eval_report << "\n";
    } else if (check->parsed()) {
      return run_grad_check(check_seed, check_trials, check_step, check_tol);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
