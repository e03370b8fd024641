#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "dhtv/sparse.hpp"

namespace dhtv {

enum class SolverKind { kAuto, kFistaDual, kAdmm };

/// kDamped uses (t_k - t_{k+1}) / t_{k+1}; kClassic uses (t_k - 1) / t_{k+1}.
enum class Momentum { kDamped, kClassic };

enum class Termination { kTolerance, kMaxIterations };

struct SolveConfig {
  double lambda = 0.0;
  std::int64_t max_iters = 200000;
  /// Relative change of the primal objective over `window` iterations.
  double tol = 1e-8;
  int window = 10;
  /// alpha = step_safety / lambda_max(2 L^T L)
  double step_safety = 0.99;
  SolverKind solver_kind = SolverKind::kAuto;
  Momentum momentum = Momentum::kClassic;
  /// Reset momentum when the dual objective increases (FISTA only).
  bool adaptive_restart = true;
  /// Run FISTA on the row-normalized operator with per-row dual bounds.
  bool precondition = true;

  /// Throws InvalidArgument on out-of-range fields.
  void validate() const;
};

struct SolveReport {
  Eigen::VectorXd c_hat;
  /// Dual iterate; empty for ADMM.
  Eigen::VectorXd u_hat;
  /// Primal objective 1/2 |y - Hc|^2 + lambda |Lc|_1 after each iteration.
  std::vector<double> objective_trace;
  /// FISTA: duality gap lambda |Lc|_1 - <u, Lc>. ADMM: primal residual |Lc - z|_2.
  std::vector<double> gap_trace;
  std::int64_t iterations = 0;
  Termination termination = Termination::kTolerance;
  double alpha_used = 0.0;
  SolverKind solver_used = SolverKind::kFistaDual;
  int restarts = 0;

  double final_objective() const;
};

std::string_view to_string(SolverKind kind);
SolverKind parse_solver_kind(std::string_view name);
std::string_view to_string(Termination t);

/// Componentwise projection onto [-lambda, lambda].
Eigen::VectorXd clip(const Eigen::Ref<const Eigen::VectorXd>& a, double lambda);

/// Largest eigenvalue of 2 L^T L by power iteration on v -> 2 L^T (L v).
/// Throws ConvergenceFailure if the Rayleigh quotient has not settled to
/// `rel_tol` within `max_iters`.
double power_iteration_sq_norm(const SparseMatrix& l, double rel_tol = 1e-10, int max_iters = 20000);

/// 1/2 |y - Hc|^2 + lambda |Lc|_1, with h == nullptr meaning H = I.
double primal_objective(const Eigen::Ref<const Eigen::VectorXd>& y, const SparseMatrix* h,
                        const SparseMatrix& l, double lambda, const Eigen::Ref<const Eigen::VectorXd>& c);

/// FISTA on the box-constrained dual of the H = I problem. `initial_dual`
/// (clipped to the box) replaces the zero start when given.
SolveReport fista_dual(const Eigen::Ref<const Eigen::VectorXd>& y, const SparseMatrix& l,
                       const SolveConfig& cfg,
                       const std::optional<Eigen::VectorXd>& initial_dual = std::nullopt);

/// Scaled-form ADMM with splitting z = Lc.
SolveReport admm_generalized_lasso(const Eigen::Ref<const Eigen::VectorXd>& y, const SparseMatrix& h,
                                   const SparseMatrix& l, const SolveConfig& cfg);

/// Dispatches on cfg.solver_kind; kAuto picks FISTA when h == nullptr (H = I)
/// and ADMM otherwise.
SolveReport solve(const Eigen::Ref<const Eigen::VectorXd>& y, const SparseMatrix* h, const SparseMatrix& l,
                  const SolveConfig& cfg);

/// min over v in the subdifferential of |.|_1 at L c of
/// |H^T (H c - y) + lambda L^T v|_inf. Rows with |(Lc)_r| > 1e-7 max_r |(Lc)_r|
/// are active; the rest are fitted by box-constrained least squares.
double kkt_residual(const Eigen::Ref<const Eigen::VectorXd>& y, const SparseMatrix& h, const SparseMatrix& l,
                    double lambda, const Eigen::Ref<const Eigen::VectorXd>& c_hat);

/// CSV with header "iteration,objective,gap".
void write_trace_csv(std::ostream& out, const SolveReport& report);

}  // namespace dhtv
