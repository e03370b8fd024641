#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dhtv/dataset.hpp"
#include "dhtv/geometry.hpp"
#include "dhtv/solver.hpp"
#include "dhtv/sparse.hpp"

namespace dhtv {

/// Per-feature z-score (population standard deviation).
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  /// Statistics of the rows of `features`. A constant feature is
  /// DegenerateInput.
  static Standardization fit(const Eigen::Ref<const Eigen::MatrixXd>& features);

  /// M x d raw rows -> d x M standardized columns.
  Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& features) const;
  Eigen::VectorXd apply_point(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

enum class GridPolicy {
  /// Grid points are the (deduplicated) training points, so H = I.
  kDataPoints,
  /// Caller-supplied grid; every training point must lie in its hull.
  kExplicit,
};

struct FitOptions {
  GridPolicy grid = GridPolicy::kDataPoints;
  /// Raw-feature grid points (rows) for kExplicit.
  Eigen::MatrixXd explicit_grid;
  DelaunayOptions delaunay;
};

struct FitMetadata {
  SolverKind solver = SolverKind::kFistaDual;
  Termination termination = Termination::kTolerance;
  std::int64_t iterations = 0;
  double objective = 0.0;
  double htv = 0.0;
  std::int64_t n_samples = 0;
  std::int64_t n_unique = 0;
  std::vector<std::string> feature_names;
  std::string target_name;
};

/// Training points after standardization and duplicate merging.
struct DedupResult {
  /// d x U, unique points in lexicographic order.
  Eigen::MatrixXd points;
  /// Mean target of each group.
  Eigen::VectorXd targets;
  /// group[m] is the column of `points` that sample m was merged into.
  std::vector<std::int64_t> group;
};

/// Points equal after rounding standardized coordinates to 12 decimals are
/// merged; the representative is the lexicographically smallest member.
DedupResult deduplicate(const Eigen::Ref<const Eigen::MatrixXd>& standardized,
                        const Eigen::Ref<const Eigen::VectorXd>& targets);

/// Everything about a fit that does not depend on lambda.
struct FitProblem {
  Standardization standardization;
  std::shared_ptr<const Triangulation> triangulation;
  /// Empty (0 x 0) under kDataPoints, where H = I.
  SparseMatrix forward;
  SparseMatrix regularization;
  Eigen::VectorXd targets;
  std::int64_t n_samples = 0;
  std::int64_t n_unique = 0;
  std::vector<std::string> feature_names;
  std::string target_name;

  bool identity_forward() const { return forward.rows() == 0; }
};

FitProblem prepare_fit(const Dataset& train, const FitOptions& options = {});

class CpwlModel {
 public:
  CpwlModel() = default;
  /// The mesh is shared, so models fitted on one problem for several lambdas
  /// do not copy it.
  CpwlModel(std::shared_ptr<const Triangulation> triangulation, Eigen::VectorXd coefficients,
            Standardization standardization, double lambda, FitMetadata metadata = {});

  int dimension() const { return triangulation_->dimension(); }
  std::int64_t num_parameters() const { return coefficients_.size(); }
  const Triangulation& triangulation() const { return *triangulation_; }
  const Eigen::VectorXd& coefficients() const { return coefficients_; }
  const Standardization& standardization() const { return standardization_; }
  double lambda() const { return lambda_; }
  const FitMetadata& metadata() const { return metadata_; }

  /// f at a standardized point inside the hull; OutsideHull otherwise.
  double evaluate_in_hull(const Eigen::Ref<const Eigen::VectorXd>& z) const;

  /// Global extension at a standardized point: points outside the hull are
  /// first projected onto it.
  double predict_standardized(const Eigen::Ref<const Eigen::VectorXd>& z) const;

  /// Raw feature vector in, prediction out.
  double predict_one(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Rows of `features` (M x d raw).
  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& features) const;

  /// M x N_g matrix E with predict(features) = E c. Depends only on the mesh,
  /// so it can be reused across coefficient vectors on the same mesh.
  SparseMatrix evaluation_operator(const Eigen::Ref<const Eigen::MatrixXd>& features) const;

  std::vector<std::uint8_t> serialize() const;
  static CpwlModel deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static CpwlModel load(const std::filesystem::path& path);

 private:
  std::shared_ptr<const Triangulation> triangulation_;
  Eigen::VectorXd coefficients_;
  Standardization standardization_;
  double lambda_ = 0.0;
  FitMetadata metadata_;
};

/// Barycentric location of a standardized point after projection onto the
/// hull of `t`; never fails for finite input.
BarycentricLocation locate_with_projection(const Triangulation& t, const Eigen::Ref<const Eigen::VectorXd>& z);

/// Same as evaluation_operator, on standardized d x M columns.
SparseMatrix evaluation_operator(const Triangulation& t, const Eigen::Ref<const Eigen::MatrixXd>& standardized);

/// Solves the prepared problem for cfg.lambda.
CpwlModel solve_fit(const FitProblem& problem, const SolveConfig& cfg,
                    const std::optional<Eigen::VectorXd>& initial_dual = std::nullopt,
                    SolveReport* report = nullptr);

/// Standardize, deduplicate, triangulate, assemble H and L, solve.
CpwlModel fit(const Dataset& train, const SolveConfig& cfg, const FitOptions& options = {});

}  // namespace dhtv
