#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "l2t/domain.hpp"
#include "l2t/factors.hpp"
#include "l2t/kernels.hpp"

namespace l2t {

/// Denominator guard used in trace ratios and the mu term of the
/// reflection function.
inline constexpr double kEpsilonGuard = 1e-12;

/// Per-kernel statistics of one transfer experience plus its regression
/// target.
struct ExperienceFeatures {
  Eigen::VectorXd mmd;           // squared-MMD per kernel
  Eigen::MatrixXd variance;      // covariance of the h-statistic across kernels
  Eigen::VectorXd discriminant;  // trace-ratio criterion per kernel
  double inverse_ratio_target = 0.0;
};

/// Local / non-local scatter covariance matrices for one kernel, built from
/// raw target rows.
struct ScatterPair {
  Eigen::MatrixXd local;
  Eigen::MatrixXd nonlocal;
};

/// Index pairing behind the variance estimator: the larger domain is
/// subsampled (seeded, without replacement) to n = min(ns, nt) rows and
/// paired with the smaller by position. Equal sizes pair identically and
/// consume no randomness.
struct VariancePairing {
  std::vector<Eigen::Index> source_rows;
  std::vector<Eigen::Index> target_rows;

  Eigen::Index size() const {
    return static_cast<Eigen::Index>(source_rows.size());
  }
};

VariancePairing make_variance_pairing(Eigen::Index ns, Eigen::Index nt,
                                      std::uint64_t seed);

/// Biased squared-MMD estimator per kernel: all three double sums keep the
/// diagonal terms.
Eigen::VectorXd mmd_vector(const Eigen::MatrixXd& zs,
                           const Eigen::MatrixXd& zt, const KernelBank& bank);

/// Covariance matrix of the per-kernel h-statistics over all (i, i') index
/// pairs of the given pairing. Returns the zero matrix when the pairing has
/// a single row.
Eigen::MatrixXd variance_matrix(const Eigen::MatrixXd& zs,
                                const Eigen::MatrixXd& zt,
                                const KernelBank& bank,
                                const VariancePairing& pairing);

/// Convenience overload that builds the pairing from a seed.
Eigen::MatrixXd variance_matrix(const Eigen::MatrixXd& zs,
                                const Eigen::MatrixXd& zt,
                                const KernelBank& bank, std::uint64_t seed);

/// Mutual r-nearest-neighbour scatter pairs, one per kernel. Neighbourhoods
/// come from raw Euclidean distances, exclude self, break distance ties by
/// lower row index, and are shared across kernels.
std::vector<ScatterPair> scatter_matrices(const Eigen::MatrixXd& xt,
                                          const KernelBank& bank, int r);

/// Trace-ratio discriminant per kernel:
/// tr(W^T S^N W) / (tr(W^T S^L W) + epsilon).
Eigen::VectorXd discriminant_vector(const std::vector<ScatterPair>& scatter,
                                    const FactorMatrix& w);

/// Assembles the full feature tuple of one experience. The kernel bank is
/// built from the mean energy of the embedded rows; scatter matrices use the
/// raw target rows; the variance pairing is drawn from the given seed.
ExperienceFeatures featurize(const Domain& source, const Domain& target,
                             const FactorMatrix& w, double ratio, int r,
                             std::uint64_t seed);

}  // namespace l2t
