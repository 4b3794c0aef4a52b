#include "l2t/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace l2t {

KernelBank KernelBank::scaled(double eta) const {
  if (eta <= 0.0) {
    throw std::invalid_argument("KernelBank::scaled: eta must be positive");
  }
  KernelBank out;
  out.bandwidths.reserve(bandwidths.size());
  for (double b : bandwidths) {
    out.bandwidths.push_back(eta * b);
  }
  return out;
}

void KernelBank::validate() const {
  if (bandwidths.empty()) {
    throw std::invalid_argument("KernelBank: empty bandwidth list");
  }
  double prev = 0.0;
  for (double b : bandwidths) {
    if (!(b > 0.0) || !std::isfinite(b)) {
      throw std::invalid_argument("KernelBank: bandwidths must be positive and finite");
    }
    if (b <= prev) {
      throw std::invalid_argument("KernelBank: bandwidths must be strictly increasing");
    }
    prev = b;
  }
}

const std::vector<double>& default_bandwidth_exponents() {
  static const std::vector<double> exponents = [] {
    std::vector<double> e;
    for (int k = 0; k <= 32; ++k) {
      e.push_back(-8.0 + 0.5 * k);
    }
    return e;
  }();
  return exponents;
}

KernelBank unit_bank() {
  return bank_from_exponents(1.0, default_bandwidth_exponents());
}

KernelBank bank_from_exponents(double eta, const std::vector<double>& exponents) {
  if (eta <= 0.0) {
    throw std::invalid_argument("bank_from_exponents: eta must be positive");
  }
  KernelBank bank;
  bank.bandwidths.reserve(exponents.size());
  for (double e : exponents) {
    bank.bandwidths.push_back(eta * std::exp2(e));
  }
  bank.validate();
  return bank;
}

Eigen::MatrixXd pairwise_sq_dists(const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("pairwise_sq_dists: column counts differ");
  }
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
    }
  }
  return d;
}

double mean_energy(const Eigen::MatrixXd& zs, const Eigen::MatrixXd& zt) {
  if (zs.rows() == 0 || zt.rows() == 0) {
    throw std::invalid_argument("mean_energy: empty input");
  }
  const Eigen::MatrixXd d = pairwise_sq_dists(zs, zt);
  const double eta = d.sum() / static_cast<double>(d.size());
  return eta == 0.0 ? 1.0 : eta;
}

KernelBank make_bank(double eta) {
  if (!(eta > 0.0)) {
    throw std::invalid_argument("make_bank: eta must be positive");
  }
  return bank_from_exponents(eta, default_bandwidth_exponents());
}

Eigen::MatrixXd rbf_gram_from_sq_dists(const Eigen::MatrixXd& sq_dists,
                                       double delta) {
  if (!(delta > 0.0)) {
    throw std::invalid_argument("rbf_gram: delta must be positive");
  }
  return (-sq_dists / delta).array().exp();
}

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         double delta) {
  if (!(delta > 0.0)) {
    throw std::invalid_argument("rbf_gram: delta must be positive");
  }
  return rbf_gram_from_sq_dists(pairwise_sq_dists(a, b), delta);
}

}  // namespace l2t
