#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "l2t/domain.hpp"
#include "l2t/factors.hpp"
#include "l2t/inference.hpp"
#include "l2t/reflection.hpp"
#include "l2t/stats.hpp"

namespace l2t {

/// One recorded transfer run: the pair, the extractor that produced W, the
/// labeled budget, and the measured improvement ratio.
struct Experience {
  Domain source;
  Domain target;
  ExtractorId extractor = ExtractorId::joint_pca;
  FactorMatrix w;
  int n_labeled = 0;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  bool accuracy_floored = false;

  void validate() const;
};

struct ExperienceStore {
  std::vector<Experience> experiences;
  std::vector<double> grid_exponents;     // global bandwidth exponent grid
  std::vector<std::string> extractor_names;  // in first-use order

  Eigen::Index dim() const;
  void validate() const;
};

/// Synthetic pair generator: both domains carry class structure in a shared
/// low-dimensional latent space; `relatedness` controls the fraction of
/// latent directions the two domains have in common.
struct SynthConfig {
  Eigen::Index m = 20;
  Eigen::Index u_true = 4;
  int classes_per_domain = 3;
  int samples_per_class = 20;
  double relatedness = 1.0;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
};

std::pair<Domain, Domain> gen_pair(const SynthConfig& cfg);

/// 1-nearest-neighbour accuracy under Euclidean distance; distance ties go
/// to the lower train-row index.
double nn_accuracy(const Eigen::MatrixXd& train_rows,
                   const std::vector<int>& train_labels,
                   const Eigen::MatrixXd& test_rows,
                   const std::vector<int>& test_labels);

struct RatioOptions {
  /// Self-consistency mode: drop the source rows from the transfer
  /// classifier so both accuracies see the same training set.
  bool include_source = true;
};

struct RatioResult {
  double ratio = 0.0;
  double with_transfer = 0.0;     // p_st
  double without_transfer = 0.0;  // p_t
  bool floored = false;
};

/// Seeded stratified split of the target into n_labeled training rows and
/// the rest as test; compares 1-NN with and without the embedded source
/// rows. Both accuracies are floored at 1/test_count so the ratio stays
/// positive and finite.
RatioResult improvement_ratio_detailed(const Domain& source,
                                       const Domain& target,
                                       const FactorMatrix& w, int n_labeled,
                                       std::uint64_t seed,
                                       const RatioOptions& opts = {});

double improvement_ratio(const Domain& source, const Domain& target,
                         const FactorMatrix& w, int n_labeled,
                         std::uint64_t seed, const RatioOptions& opts = {});

/// Runs one base extractor. `seed` feeds random_proj; the kernel-PCA
/// bandwidth is the mean squared distance between raw target rows.
FactorMatrix extract_w(ExtractorId id, const Domain& source,
                       const Domain& target, Eigen::Index u,
                       std::uint64_t seed);

/// Builds n experiences: per index, a derived-seed synthetic pair, the
/// round-robin extractor, the cyclic labeled budget, and the measured
/// ratio.
ExperienceStore generate_experiences(int n,
                                     const std::vector<ExtractorId>& extractors,
                                     const SynthConfig& synth_template,
                                     const std::vector<int>& n_labeled_choices,
                                     std::uint64_t seed);

/// Feature tuples plus the raw quantities training needs (ratios and
/// labeled counts for the correction grid search).
struct FeatureSet {
  std::vector<ExperienceFeatures> features;
  std::vector<double> ratios;
  std::vector<int> n_labeled;
  int r = 5;
  std::vector<double> grid_exponents;
  CorrectionConfig correction;
};

FeatureSet featurize_store(const ExperienceStore& store, int r);

struct EvalReport {
  std::vector<std::string> methods;   // "l2t" first, then the base extractors
  std::vector<std::string> pair_ids;
  Eigen::MatrixXd ratios;             // pairs x methods

  std::vector<double> means() const;  // per method; empty when no pairs
};

/// Fig.-2-style comparison: per held-out pair, the inferred W against every
/// base extractor on one shared labeled/test split.
EvalReport evaluate_l2t(const ExperienceStore& store,
                        const ReflectionModel& model,
                        const std::vector<std::pair<Domain, Domain>>& test_pairs,
                        const std::vector<ExtractorId>& base, int n_labeled,
                        const InferConfig& cfg);

// --- persistence -----------------------------------------------------------

void save_store(const std::filesystem::path& dir, const ExperienceStore& store);
ExperienceStore load_store(const std::filesystem::path& dir);

void save_feature_set(const std::filesystem::path& dir, const FeatureSet& fs);
FeatureSet load_feature_set(const std::filesystem::path& dir);

struct ModelArtifacts {
  ReflectionModel model;
  double b_corr = 0.0;
  double objective = 0.0;
  int winning_restart = 0;
};

void save_model(const std::filesystem::path& dir, const ModelArtifacts& art);
ModelArtifacts load_model(const std::filesystem::path& dir);

void save_pair(const std::filesystem::path& dir, const Domain& source,
               const Domain& target);
std::pair<Domain, Domain> load_pair(const std::filesystem::path& dir);

/// Reads either a store directory (each experience contributes its pair) or
/// a directory of pair_* subdirectories.
std::vector<std::pair<Domain, Domain>> load_test_pairs(
    const std::filesystem::path& dir);

void save_report(const std::filesystem::path& path, const EvalReport& report);

}  // namespace l2t
