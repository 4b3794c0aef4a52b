#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

namespace l2t {

/// One side of a transfer pair: an n x m feature matrix with optional
/// per-row class labels.
struct Domain {
  Eigen::MatrixXd features;
  std::vector<int> labels;  // empty means unlabeled
  std::string name;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  bool labeled() const { return !labels.empty(); }

  void validate() const {
    if (labeled() && static_cast<Eigen::Index>(labels.size()) != rows()) {
      throw std::invalid_argument("Domain '" + name +
                                  "': label count does not match row count");
    }
    for (int y : labels) {
      if (y < 0) {
        throw std::invalid_argument("Domain '" + name +
                                    "': class indices must be nonnegative");
      }
    }
  }

  /// Number of distinct classes present (max label + 1), 0 if unlabeled.
  int class_count() const {
    int c = 0;
    for (int y : labels) c = std::max(c, y + 1);
    return c;
  }
};

}  // namespace l2t
