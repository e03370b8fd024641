#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace dhtv {

/// Samples as rows: features is M x d, targets has M entries.
struct Dataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd targets;
  std::vector<std::string> feature_names;
  std::string target_name;

  std::int64_t size() const { return targets.size(); }
  int dimension() const { return static_cast<int>(features.cols()); }

  /// Rows in the given order.
  Dataset subset(const std::vector<std::int64_t>& rows) const;

  /// Throws InvalidArgument on shape mismatch, non-finite values or M = 0.
  void validate() const;
};

}  // namespace dhtv
