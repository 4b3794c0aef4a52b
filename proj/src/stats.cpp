#include "l2t/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "l2t/rng.hpp"

namespace l2t {

VariancePairing make_variance_pairing(Eigen::Index ns, Eigen::Index nt,
                                      std::uint64_t seed) {
  if (ns < 1 || nt < 1) {
    throw std::invalid_argument("make_variance_pairing: empty domain");
  }
  const Eigen::Index n = std::min(ns, nt);
  VariancePairing pairing;
  pairing.source_rows.resize(n);
  pairing.target_rows.resize(n);
  std::iota(pairing.source_rows.begin(), pairing.source_rows.end(), 0);
  std::iota(pairing.target_rows.begin(), pairing.target_rows.end(), 0);
  if (ns == nt) return pairing;

  std::vector<Eigen::Index> larger(static_cast<std::size_t>(std::max(ns, nt)));
  std::iota(larger.begin(), larger.end(), 0);
  Rng rng(seed);
  rng.shuffle(larger);
  larger.resize(static_cast<std::size_t>(n));
  if (ns > nt) {
    pairing.source_rows = larger;
  } else {
    pairing.target_rows = larger;
  }
  return pairing;
}

Eigen::VectorXd mmd_vector(const Eigen::MatrixXd& zs,
                           const Eigen::MatrixXd& zt, const KernelBank& bank) {
  if (zs.rows() == 0 || zt.rows() == 0) {
    throw std::invalid_argument("mmd_vector: empty domain");
  }
  if (zs.cols() != zt.cols()) {
    throw std::invalid_argument("mmd_vector: column counts differ");
  }
  const Eigen::MatrixXd dss = pairwise_sq_dists(zs, zs);
  const Eigen::MatrixXd dtt = pairwise_sq_dists(zt, zt);
  const Eigen::MatrixXd dst = pairwise_sq_dists(zs, zt);

  Eigen::VectorXd out(bank.count());
  for (int k = 0; k < bank.count(); ++k) {
    const double delta = bank.bandwidths[static_cast<std::size_t>(k)];
    const double mean_ss = rbf_gram_from_sq_dists(dss, delta).mean();
    const double mean_tt = rbf_gram_from_sq_dists(dtt, delta).mean();
    const double mean_st = rbf_gram_from_sq_dists(dst, delta).mean();
    out(k) = mean_ss + mean_tt - 2.0 * mean_st;
  }
  return out;
}

namespace {

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& x,
                            const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  }
  return out;
}

}  // namespace

Eigen::MatrixXd variance_matrix(const Eigen::MatrixXd& zs,
                                const Eigen::MatrixXd& zt,
                                const KernelBank& bank,
                                const VariancePairing& pairing) {
  if (zs.cols() != zt.cols()) {
    throw std::invalid_argument("variance_matrix: column counts differ");
  }
  const Eigen::Index n = pairing.size();
  const int nk = bank.count();
  if (n <= 1) {
    // the 1/(n^2 - 1) normalizer is undefined at n = 1
    return Eigen::MatrixXd::Zero(nk, nk);
  }
  const Eigen::MatrixXd ps = select_rows(zs, pairing.source_rows);
  const Eigen::MatrixXd pt = select_rows(zt, pairing.target_rows);
  const Eigen::MatrixXd dss = pairwise_sq_dists(ps, ps);
  const Eigen::MatrixXd dtt = pairwise_sq_dists(pt, pt);
  const Eigen::MatrixXd dst = pairwise_sq_dists(ps, pt);

  const double nn = static_cast<double>(n) * static_cast<double>(n);
  // rows of hc are the centered h-statistics, one row per kernel
  Eigen::MatrixXd hc(nk, n * n);
  for (int k = 0; k < nk; ++k) {
    const double delta = bank.bandwidths[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd h = rbf_gram_from_sq_dists(dss, delta) +
                              rbf_gram_from_sq_dists(dtt, delta) -
                              2.0 * rbf_gram_from_sq_dists(dst, delta);
    const double h_bar = h.sum() / nn;
    Eigen::Map<const Eigen::VectorXd> flat(h.data(), h.size());
    hc.row(k) = flat.transpose().array() - h_bar;
  }

  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(nk, nk);
  q.selfadjointView<Eigen::Lower>().rankUpdate(hc, 1.0 / (nn - 1.0));
  q.triangularView<Eigen::StrictlyUpper>() =
      q.transpose().triangularView<Eigen::StrictlyUpper>();
  return q;
}

Eigen::MatrixXd variance_matrix(const Eigen::MatrixXd& zs,
                                const Eigen::MatrixXd& zt,
                                const KernelBank& bank, std::uint64_t seed) {
  return variance_matrix(zs, zt, bank,
                         make_variance_pairing(zs.rows(), zt.rows(), seed));
}

std::vector<ScatterPair> scatter_matrices(const Eigen::MatrixXd& xt,
                                          const KernelBank& bank, int r) {
  const Eigen::Index n = xt.rows();
  if (n < 2) {
    throw std::invalid_argument("scatter_matrices: need at least two rows");
  }
  if (r < 1) {
    throw std::invalid_argument("scatter_matrices: neighbor count must be positive");
  }
  if (r >= n) {
    throw std::invalid_argument(
        "scatter_matrices: neighbor count must be smaller than the row count");
  }
  const Eigen::MatrixXd d = pairwise_sq_dists(xt, xt);

  // r nearest neighbours per row, self excluded, ties to the lower index
  std::vector<std::vector<bool>> is_neighbor(
      static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n), false));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      if (d(j, a) != d(j, b)) return d(j, a) < d(j, b);
      return a < b;
    });
    int taken = 0;
    for (Eigen::Index idx : order) {
      if (idx == j) continue;
      is_neighbor[static_cast<std::size_t>(j)][static_cast<std::size_t>(idx)] = true;
      if (++taken == r) break;
    }
  }
  Eigen::MatrixXd mutual(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index jp = 0; jp < n; ++jp) {
      mutual(j, jp) =
          (is_neighbor[static_cast<std::size_t>(j)][static_cast<std::size_t>(jp)] &&
           is_neighbor[static_cast<std::size_t>(jp)][static_cast<std::size_t>(j)])
              ? 1.0
              : 0.0;
    }
  }

  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  std::vector<ScatterPair> out;
  out.reserve(static_cast<std::size_t>(bank.count()));
  for (int k = 0; k < bank.count(); ++k) {
    const double delta = bank.bandwidths[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd gram = rbf_gram_from_sq_dists(d, delta);
    const Eigen::MatrixXd local_w = gram.cwiseProduct(mutual) * norm;
    const Eigen::MatrixXd nonlocal_w = (gram - gram.cwiseProduct(mutual)) * norm;

    // sum_{j,j'} C_{jj'} (x_j - x_j')(x_j - x_j')^T
    //   = X^T (diag(C 1) + diag(C^T 1) - C - C^T) X
    auto scatter_of = [&](const Eigen::MatrixXd& c) {
      const Eigen::VectorXd row_sums = c.rowwise().sum();
      const Eigen::VectorXd col_sums = c.colwise().sum();
      Eigen::MatrixXd lap = -(c + c.transpose());
      lap.diagonal() += row_sums + col_sums;
      Eigen::MatrixXd s = xt.transpose() * lap * xt;
      return Eigen::MatrixXd(0.5 * (s + s.transpose()));
    };
    out.push_back(ScatterPair{scatter_of(local_w), scatter_of(nonlocal_w)});
  }
  return out;
}

Eigen::VectorXd discriminant_vector(const std::vector<ScatterPair>& scatter,
                                    const FactorMatrix& w) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(scatter.size()));
  for (std::size_t k = 0; k < scatter.size(); ++k) {
    const ScatterPair& pair = scatter[k];
    if (pair.local.rows() != w.dim()) {
      throw std::invalid_argument(
          "discriminant_vector: scatter dimension does not match W");
    }
    const double tr_nonlocal =
        (pair.nonlocal * w.entries).cwiseProduct(w.entries).sum();
    const double tr_local =
        (pair.local * w.entries).cwiseProduct(w.entries).sum();
    out(static_cast<Eigen::Index>(k)) = tr_nonlocal / (tr_local + kEpsilonGuard);
  }
  return out;
}

ExperienceFeatures featurize(const Domain& source, const Domain& target,
                             const FactorMatrix& w, double ratio, int r,
                             std::uint64_t seed) {
  if (!(ratio > 0.0)) {
    throw std::invalid_argument("featurize: ratio must be positive");
  }
  if (source.dim() != w.dim() || target.dim() != w.dim()) {
    throw std::invalid_argument(
        "featurize: W row count does not match the feature dimension");
  }
  const Eigen::MatrixXd zs = source.features * w.entries;
  const Eigen::MatrixXd zt = target.features * w.entries;
  const KernelBank bank = make_bank(mean_energy(zs, zt));

  ExperienceFeatures feats;
  feats.mmd = mmd_vector(zs, zt, bank);
  feats.variance = variance_matrix(zs, zt, bank, seed);
  feats.discriminant =
      discriminant_vector(scatter_matrices(target.features, bank, r), w);
  feats.inverse_ratio_target = 1.0 / ratio;
  return feats;
}

}  // namespace l2t
