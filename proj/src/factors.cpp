#include "l2t/factors.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "l2t/kernels.hpp"
#include "l2t/rng.hpp"

namespace l2t {

void FactorMatrix::validate() const {
  if (latent_dim() > dim()) {
    throw std::invalid_argument(
        "FactorMatrix: latent dimension exceeds feature dimension");
  }
  if (!entries.allFinite()) {
    throw std::invalid_argument("FactorMatrix: entries must be finite");
  }
}

std::string to_string(ExtractorId id) {
  switch (id) {
    case ExtractorId::joint_pca: return "joint_pca";
    case ExtractorId::target_pca: return "target_pca";
    case ExtractorId::tca_lite: return "tca_lite";
    case ExtractorId::random_proj: return "random_proj";
    case ExtractorId::kpca_recover: return "kpca_recover";
  }
  throw std::logic_error("to_string: unknown ExtractorId");
}

ExtractorId extractor_from_string(const std::string& token) {
  for (ExtractorId id : all_extractors()) {
    if (to_string(id) == token) return id;
  }
  throw std::invalid_argument("unknown extractor token: '" + token + "'");
}

const std::vector<ExtractorId>& all_extractors() {
  static const std::vector<ExtractorId> ids = {
      ExtractorId::joint_pca, ExtractorId::target_pca, ExtractorId::tca_lite,
      ExtractorId::random_proj, ExtractorId::kpca_recover};
  return ids;
}

namespace {

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& x) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = std::numeric_limits<double>::epsilon() *
                        static_cast<double>(std::max(x.rows(), x.cols())) *
                        (sv.size() > 0 ? sv(0) : 0.0);
  Eigen::VectorXd inv_sv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) inv_sv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

// Shared PCA core: top-u right singular directions of the column-centered
// data, sign-fixed so each column's largest-magnitude entry is positive.
FactorMatrix pca_directions(const Eigen::MatrixXd& x, Eigen::Index u) {
  if (u < 1) {
    throw std::invalid_argument("pca: latent dimension must be positive");
  }
  if (u > x.cols()) {
    throw std::invalid_argument(
        "pca: latent dimension exceeds feature dimension");
  }
  if (x.rows() < 2) {
    throw std::invalid_argument("pca: need at least two rows");
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  Eigen::MatrixXd w = svd.matrixV().leftCols(u);
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    Eigen::Index imax = 0;
    w.col(j).cwiseAbs().maxCoeff(&imax);
    if (w(imax, j) < 0.0) w.col(j) = -w.col(j);
  }
  return FactorMatrix{std::move(w)};
}

}  // namespace

FactorMatrix recover_w(const Eigen::MatrixXd& xt, const Eigen::MatrixXd& zt) {
  if (xt.rows() == 0) {
    throw std::invalid_argument("recover_w: empty target matrix");
  }
  if (zt.rows() != xt.rows()) {
    throw std::invalid_argument("recover_w: row counts of Xt and Zt differ");
  }
  // G would be pinv(X) Z Z^T pinv(X)^T; forming it as M M^T keeps it PSD in
  // floating point.
  const Eigen::MatrixXd m = pseudo_inverse(xt) * zt;
  Eigen::MatrixXd g = m * m.transpose();
  g = 0.5 * (g + g.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("recover_w: eigendecomposition failed");
  }
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double lambda_max = std::max(values(values.size() - 1), 0.0);
  const double keep_threshold = 1e-10 * lambda_max;

  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = values.size() - 1; i >= 0; --i) {
    if (values(i) > keep_threshold && values(i) > 0.0) kept.push_back(i);
  }
  Eigen::MatrixXd w(g.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c) {
    w.col(static_cast<Eigen::Index>(c)) =
        eig.eigenvectors().col(kept[c]) * std::sqrt(values(kept[c]));
  }
  return FactorMatrix{std::move(w)};
}

FactorMatrix joint_pca(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& xt,
                       Eigen::Index u) {
  if (xs.cols() != xt.cols()) {
    throw std::invalid_argument("joint_pca: feature dimensions differ");
  }
  Eigen::MatrixXd stacked(xs.rows() + xt.rows(), xs.cols());
  stacked << xs, xt;
  return pca_directions(stacked, u);
}

FactorMatrix target_pca(const Eigen::MatrixXd& xt, Eigen::Index u) {
  return pca_directions(xt, u);
}

FactorMatrix tca_lite(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& xt,
                      Eigen::Index u, double ridge) {
  if (xs.cols() != xt.cols()) {
    throw std::invalid_argument("tca_lite: feature dimensions differ");
  }
  const Eigen::Index ns = xs.rows(), nt = xt.rows(), m = xs.cols();
  if (ns == 0 || nt == 0) {
    throw std::invalid_argument("tca_lite: empty domain");
  }
  if (u < 1 || u > m) {
    throw std::invalid_argument("tca_lite: invalid latent dimension");
  }
  const Eigen::Index n = ns + nt;
  Eigen::MatrixXd x(n, m);
  x << xs, xt;

  // X^T L X for the rank-one MMD coefficient matrix L = a a^T.
  Eigen::VectorXd a(n);
  a.head(ns).setConstant(1.0 / static_cast<double>(ns));
  a.tail(nt).setConstant(-1.0 / static_cast<double>(nt));
  const Eigen::VectorXd xa = x.transpose() * a;
  Eigen::MatrixXd b = xa * xa.transpose();
  b.diagonal().array() += ridge;

  // X^T C X is the scatter of the column-centered stack.
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd scatter = centered.transpose() * centered;
  scatter = 0.5 * (scatter + scatter.transpose()).eval();

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(scatter, b);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("tca_lite: generalized eigensolve failed despite ridge");
  }
  Eigen::MatrixXd w(m, u);
  for (Eigen::Index j = 0; j < u; ++j) {
    // eigenvalues ascend; take the trailing u columns, largest first
    Eigen::VectorXd v = eig.eigenvectors().col(m - 1 - j);
    const double norm = v.norm();
    if (!(norm > 0.0) || !v.allFinite()) {
      throw std::runtime_error("tca_lite: degenerate eigenvector");
    }
    w.col(j) = v / norm;
  }
  return FactorMatrix{std::move(w)};
}

FactorMatrix random_proj(Eigen::Index m, Eigen::Index u, std::uint64_t seed) {
  if (u < 1 || u > m) {
    throw std::invalid_argument("random_proj: invalid latent dimension");
  }
  Rng rng(seed);
  const Eigen::MatrixXd g = rng.gaussian(m, u);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(m, u);
  return FactorMatrix{std::move(q)};
}

FactorMatrix kpca_recover(const Eigen::MatrixXd& xt, Eigen::Index u,
                          double delta) {
  const Eigen::Index n = xt.rows();
  if (n < 2) {
    throw std::invalid_argument("kpca_recover: need at least two rows");
  }
  if (u < 1) {
    throw std::invalid_argument("kpca_recover: latent dimension must be positive");
  }
  const Eigen::Index u_eff = std::min(u, n);

  const Eigen::MatrixXd k = rbf_gram(xt, xt, delta);
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  const double total_mean = k.mean();
  Eigen::MatrixXd centered = k;
  centered.colwise() -= row_mean;
  centered.rowwise() -= row_mean.transpose();
  centered.array() += total_mean;
  centered = 0.5 * (centered + centered.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(centered);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("kpca_recover: eigendecomposition failed");
  }
  Eigen::MatrixXd scores(n, u_eff);
  for (Eigen::Index j = 0; j < u_eff; ++j) {
    const Eigen::Index idx = n - 1 - j;  // largest eigenvalues first
    const double lambda = std::max(eig.eigenvalues()(idx), 0.0);
    scores.col(j) = eig.eigenvectors().col(idx) * std::sqrt(lambda);
  }
  return recover_w(xt, scores);
}

}  // namespace l2t
