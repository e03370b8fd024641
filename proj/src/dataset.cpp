#include "dhtv/dataset.hpp"

#include <string>

#include "dhtv/errors.hpp"

namespace dhtv {

Dataset Dataset::subset(const std::vector<std::int64_t>& rows) const {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.targets.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    if (r < 0 || r >= size()) fail(ErrorCode::kInvalidArgument, "row index " + std::to_string(r) + " out of range");
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(r);
    out.targets[static_cast<Eigen::Index>(i)] = targets[r];
  }
  out.feature_names = feature_names;
  out.target_name = target_name;
  return out;
}

void Dataset::validate() const {
  if (targets.size() == 0) fail(ErrorCode::kInsufficientData, "dataset is empty");
  if (features.rows() != targets.size()) {
    fail(ErrorCode::kDimensionMismatch, "features have " + std::to_string(features.rows()) + " rows but there are " +
                                            std::to_string(targets.size()) + " targets");
  }
  if (features.cols() < 1) fail(ErrorCode::kInvalidArgument, "dataset has no feature columns");
  if (!features.allFinite() || !targets.allFinite()) fail(ErrorCode::kInvalidArgument, "dataset has non-finite values");
  if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != features.cols()) {
    fail(ErrorCode::kDimensionMismatch, "feature_names does not match the feature count");
  }
}

}  // namespace dhtv
