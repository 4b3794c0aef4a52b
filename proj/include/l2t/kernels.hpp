#pragma once

#include <Eigen/Core>
#include <vector>

namespace l2t {

/// Ordered grid of RBF bandwidths. Bandwidths are strictly increasing and
/// positive; the grid is multiplicative with ratio sqrt(2) when built by
/// make_bank.
struct KernelBank {
  std::vector<double> bandwidths;

  int count() const { return static_cast<int>(bandwidths.size()); }

  /// Same exponent grid rescaled by a positive energy statistic.
  KernelBank scaled(double eta) const;

  /// Throws unless bandwidths are positive and strictly increasing.
  void validate() const;
};

/// Exponents of the default bandwidth grid: -8, -7.5, ..., +8 (33 values).
const std::vector<double>& default_bandwidth_exponents();

/// Bank with bandwidths 2^e for each default exponent e (the unit grid,
/// i.e. make_bank(1)).
KernelBank unit_bank();

/// Bank whose bandwidths are eta * 2^e over the given exponents.
KernelBank bank_from_exponents(double eta, const std::vector<double>& exponents);

/// Entry (i, j) = squared Euclidean distance between row i of a and row j
/// of b. Column counts must agree.
Eigen::MatrixXd pairwise_sq_dists(const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& b);

/// Mean of all cross squared distances between rows of zs and rows of zt.
/// Returns 1 when that mean is exactly zero so downstream bandwidths stay
/// positive. Throws on empty input or column mismatch.
double mean_energy(const Eigen::MatrixXd& zs, const Eigen::MatrixXd& zt);

/// 33 RBF bandwidths 2^e * eta for e = -8, -7.5, ..., +8.
KernelBank make_bank(double eta);

/// RBF Gram matrix exp(-||a_i - b_j||^2 / delta). delta must be positive.
Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         double delta);

/// Gram matrix from precomputed squared distances.
Eigen::MatrixXd rbf_gram_from_sq_dists(const Eigen::MatrixXd& sq_dists,
                                       double delta);

}  // namespace l2t
