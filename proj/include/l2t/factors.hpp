#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace l2t {

/// Latent factor matrix W (m x u): the uniform parameterization of what is
/// transferred between a pair of domains. Rows index original features,
/// columns index latent directions.
struct FactorMatrix {
  Eigen::MatrixXd entries;

  Eigen::Index dim() const { return entries.rows(); }         // m
  Eigen::Index latent_dim() const { return entries.cols(); }  // u

  void validate() const;
};

/// The closed set of base extractors used to generate experiences.
enum class ExtractorId {
  joint_pca,
  target_pca,
  tca_lite,
  random_proj,
  kpca_recover,
};

std::string to_string(ExtractorId id);
ExtractorId extractor_from_string(const std::string& token);
const std::vector<ExtractorId>& all_extractors();

/// Recovers W from a target feature matrix and its latent embedding so that
/// Xt W W^T Xt^T reproduces Zt Zt^T (exactly when the columns of Zt lie in
/// the column space of Xt). Columns whose eigenvalues fall below
/// 1e-10 * lambda_max are dropped, so the returned latent dimension may be
/// smaller than Zt's.
FactorMatrix recover_w(const Eigen::MatrixXd& xt, const Eigen::MatrixXd& zt);

/// Top-u right singular directions of the row-stacked, column-mean-centered
/// [xs; xt]. Columns are orthonormal with the sign fixed so each column's
/// largest-magnitude entry is positive.
FactorMatrix joint_pca(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& xt,
                       Eigen::Index u);

/// joint_pca on the target alone.
FactorMatrix target_pca(const Eigen::MatrixXd& xt, Eigen::Index u);

/// Linear transfer-component extractor: maximizes embedded variance per unit
/// of the linear MMD statistic. Solves the generalized eigenproblem
/// (X^T C X) v = lambda (X^T L X + ridge I) v over the stacked data and
/// returns the top-u eigenvectors with unit-norm columns.
FactorMatrix tca_lite(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& xt,
                      Eigen::Index u, double ridge = 1e-3);

/// Orthonormalized columns of a seeded standard-normal m x u draw.
FactorMatrix random_proj(Eigen::Index m, Eigen::Index u, std::uint64_t seed);

/// Kernel-PCA embedding of xt under an RBF of bandwidth delta, recovered to
/// a factor matrix through recover_w.
FactorMatrix kpca_recover(const Eigen::MatrixXd& xt, Eigen::Index u,
                          double delta);

}  // namespace l2t
