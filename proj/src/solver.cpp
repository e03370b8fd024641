#include "dhtv/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <string>

#include <Eigen/SparseCholesky>

#include "dhtv/errors.hpp"

namespace dhtv {
namespace {

constexpr double kActiveFraction = 1e-7;
// Rows below this fraction of sum_j |L_rj c_j| are round-off, whatever the
// largest row is.
constexpr double kActiveFloor = 1e-11;
// Dual objective increases smaller than this (relative) are round-off and do
// not trigger a restart.
constexpr double kRestartSlack = 1e-13;

// The primal objective of accelerated iterates is not monotone, so the whole
// window has to lie within tol of the latest value, not just its endpoints.
// `floor` keeps the test meaningful when the optimum is (nearly) zero.
bool window_converged(const std::vector<double>& trace, int window, double tol, double floor) {
  if (static_cast<int>(trace.size()) <= window) return false;
  const auto first = trace.end() - window - 1;
  const auto [lo, hi] = std::minmax_element(first, trace.end());
  const double scale = std::max({std::abs(trace.back()), floor, std::numeric_limits<double>::min()});
  return *hi - *lo <= tol * scale;
}

void check_shapes(const Eigen::Ref<const Eigen::VectorXd>& y, const SparseMatrix& l) {
  if (l.cols() != y.size()) {
    fail(ErrorCode::kDimensionMismatch, "L has " + std::to_string(l.cols()) + " columns but y has " +
                                            std::to_string(y.size()) + " entries");
  }
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& a, double t) {
  return a.unaryExpr([t](double x) { return std::copysign(std::max(std::abs(x) - t, 0.0), x); });
}

SolveReport trivial_report(const Eigen::Ref<const Eigen::VectorXd>& y, const SparseMatrix& l, double lambda,
                           SolverKind kind) {
  SolveReport r;
  r.c_hat = y;
  if (kind == SolverKind::kFistaDual) r.u_hat = Eigen::VectorXd::Zero(l.rows());
  r.objective_trace.push_back(primal_objective(y, nullptr, l, lambda, y));
  r.gap_trace.push_back(lambda * l.multiply(y).lpNorm<1>());
  r.solver_used = kind;
  return r;
}

}  // namespace

void SolveConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  if (!(step_safety > 0.0 && step_safety < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "step_safety must lie in (0, 1)");
  }
  if (max_iters < 1) fail(ErrorCode::kInvalidArgument, "max_iters must be positive");
  if (!(tol >= 0.0)) fail(ErrorCode::kInvalidArgument, "tol must be >= 0");
  if (window < 1) fail(ErrorCode::kInvalidArgument, "window must be positive");
}

double SolveReport::final_objective() const {
  return objective_trace.empty() ? std::numeric_limits<double>::quiet_NaN() : objective_trace.back();
}

std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::kAuto: return "auto";
    case SolverKind::kFistaDual: return "fista";
    case SolverKind::kAdmm: return "admm";
  }
  return "unknown";
}

SolverKind parse_solver_kind(std::string_view name) {
  if (name == "auto") return SolverKind::kAuto;
  if (name == "fista" || name == "fista_dual") return SolverKind::kFistaDual;
  if (name == "admm") return SolverKind::kAdmm;
  fail(ErrorCode::kInvalidArgument, "unknown solver '" + std::string(name) + "'");
}

std::string_view to_string(Termination t) {
  return t == Termination::kTolerance ? "TOL" : "MAX_ITERS";
}

Eigen::VectorXd clip(const Eigen::Ref<const Eigen::VectorXd>& a, double lambda) {
  if (lambda < 0.0) fail(ErrorCode::kInvalidArgument, "clip: lambda must be >= 0");
  return a.cwiseMax(-lambda).cwiseMin(lambda);
}

double power_iteration_sq_norm(const SparseMatrix& l, double rel_tol, int max_iters) {
  if (l.rows() == 0 || l.cols() == 0) fail(ErrorCode::kInvalidArgument, "power iteration on an empty operator");
  std::mt19937_64 rng(0x5eed);
  Eigen::VectorXd v(l.cols());
  for (auto& x : v) x = 0.5 + static_cast<double>(rng() >> 11) * 0x1.0p-53;
  v.normalize();
  Eigen::VectorXd lv(l.rows());
  Eigen::VectorXd w(l.cols());
  double estimate = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    l.multiply_into(v, lv);
    l.multiply_transpose_into(lv, w);
    w *= 2.0;
    const double rq = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (it > 0 && std::abs(rq - estimate) <= rel_tol * rq) return rq;
    estimate = rq;
  }
  fail(ErrorCode::kConvergenceFailure, "power iteration did not converge in " + std::to_string(max_iters) +
                                           " iterations");
}

double primal_objective(const Eigen::Ref<const Eigen::VectorXd>& y, const SparseMatrix* h,
                        const SparseMatrix& l, double lambda, const Eigen::Ref<const Eigen::VectorXd>& c) {
  const Eigen::VectorXd fit = h ? Eigen::VectorXd(h->multiply(c)) : Eigen::VectorXd(c);
  const double reg = l.rows() == 0 ? 0.0 : l.multiply(c).lpNorm<1>();
  return 0.5 * (y - fit).squaredNorm() + lambda * reg;
}

SolveReport fista_dual(const Eigen::Ref<const Eigen::VectorXd>& y, const SparseMatrix& l,
                       const SolveConfig& cfg, const std::optional<Eigen::VectorXd>& initial_dual) {
  cfg.validate();
  check_shapes(y, l);
  const double lambda = cfg.lambda;
  if (l.rows() == 0 || lambda == 0.0) return trivial_report(y, l, lambda, SolverKind::kFistaDual);

  // With preconditioning the iterations run on D^-1 L (unit rows) with the
  // per-row box |u'_r| <= lambda |L_r|; u = D^-1 u' recovers the dual of the
  // original problem, and the primal iterates are unchanged.
  Eigen::VectorXd row_scale = Eigen::VectorXd::Ones(l.rows());
  SparseMatrix scaled;
  if (cfg.precondition) {
    for (std::int64_t r = 0; r < l.rows(); ++r) {
      double sq = 0.0;
      for (double v : l.row_values(r)) sq += v * v;
      if (sq > 0.0) row_scale[r] = std::sqrt(sq);
    }
    std::vector<Triplet> trips = l.to_triplets();
    for (auto& t : trips) t.value /= row_scale[t.row];
    scaled = SparseMatrix::from_triplets(l.rows(), l.cols(), std::move(trips));
  }
  const SparseMatrix& op = cfg.precondition ? scaled : l;
  const Eigen::VectorXd bound = lambda * row_scale;

  const double lmax = power_iteration_sq_norm(op);
  if (lmax == 0.0) return trivial_report(y, l, lambda, SolverKind::kFistaDual);

  const double objective_floor = 1e-12 * 0.5 * y.squaredNorm();
  SolveReport report;
  report.solver_used = SolverKind::kFistaDual;
  report.alpha_used = cfg.step_safety / lmax;
  const double alpha = report.alpha_used;

  const Eigen::VectorXd ly = op.multiply(y);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(l.rows());
  if (initial_dual) {
    if (initial_dual->size() != l.rows()) fail(ErrorCode::kDimensionMismatch, "initial dual has wrong length");
    u = initial_dual->cwiseProduct(row_scale).cwiseMax(-bound).cwiseMin(bound);
  }
  // p = L^T u and q = L L^T u are tracked for u and the extrapolated point v,
  // so each iteration costs one product with L^T and one with L.
  Eigen::VectorXd pu = op.multiply_transpose(u);
  Eigen::VectorXd qu = op.multiply(pu);
  Eigen::VectorXd v = u;
  Eigen::VectorXd pv = pu;
  Eigen::VectorXd qv = qu;
  double t = 1.0;
  double dual_prev = 0.5 * (y - pu).squaredNorm();

  Eigen::VectorXd u_new(l.rows());
  Eigen::VectorXd pu_new(l.cols());
  Eigen::VectorXd qu_new(l.rows());
  Eigen::VectorXd lc(l.rows());
  report.termination = Termination::kMaxIterations;
  for (std::int64_t k = 0; k < cfg.max_iters; ++k) {
    u_new = (v - alpha * (-2.0 * ly + 2.0 * qv)).cwiseMax(-bound).cwiseMin(bound);
    op.multiply_transpose_into(u_new, pu_new);
    op.multiply_into(pu_new, qu_new);

    lc = ly - qu_new;
    const double l1 = lc.cwiseAbs().dot(row_scale);
    const double dual_new = 0.5 * (y - pu_new).squaredNorm();
    report.objective_trace.push_back(0.5 * pu_new.squaredNorm() + lambda * l1);
    report.gap_trace.push_back(lambda * l1 - u_new.dot(lc));

    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (cfg.adaptive_restart && dual_new > dual_prev + kRestartSlack * std::abs(dual_prev)) {
      v = u_new;
      pv = pu_new;
      qv = qu_new;
      t = 1.0;
      ++report.restarts;
    } else {
      const double beta = cfg.momentum == Momentum::kClassic ? (t - 1.0) / t_new : (t - t_new) / t_new;
      v = u_new + beta * (u_new - u);
      pv = pu_new + beta * (pu_new - pu);
      qv = qu_new + beta * (qu_new - qu);
      t = t_new;
    }
    u.swap(u_new);
    pu.swap(pu_new);
    qu.swap(qu_new);
    dual_prev = dual_new;
    report.iterations = k + 1;
    if (window_converged(report.objective_trace, cfg.window, cfg.tol, objective_floor)) {
      report.termination = Termination::kTolerance;
      break;
    }
  }
  // The division can overshoot the box by an ulp.
  report.u_hat = clip(u.cwiseQuotient(row_scale), lambda);
  report.c_hat = y - l.multiply_transpose(report.u_hat);
  return report;
}

SolveReport admm_generalized_lasso(const Eigen::Ref<const Eigen::VectorXd>& y, const SparseMatrix& h,
                                   const SparseMatrix& l, const SolveConfig& cfg) {
  cfg.validate();
  if (h.rows() != y.size() || h.cols() != l.cols()) {
    fail(ErrorCode::kDimensionMismatch, "ADMM: H is " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()) +
                                            ", y has " + std::to_string(y.size()) + " entries, L has " +
                                            std::to_string(l.cols()) + " columns");
  }
  const double lambda = cfg.lambda;
  using SpMat = Eigen::SparseMatrix<double>;
  const SpMat he = h.to_eigen();
  const SpMat le = l.to_eigen();
  const SpMat hth = SpMat(he.transpose()) * he;
  const SpMat ltl = SpMat(le.transpose()) * le;
  const Eigen::VectorXd hty = h.multiply_transpose(y);

  double rho = 1.0;
  if (l.rows() > 0) {
    const double lmax = power_iteration_sq_norm(l);
    if (lmax > 0.0) rho = std::sqrt(0.5 * lmax);
  }

  Eigen::SimplicialLDLT<SpMat> ldlt;
  ldlt.analyzePattern(hth + rho * ltl);
  // Singularity does not depend on rho > 0, so the pivot test is only made
  // at the initial penalty; later refactorizations just check for success.
  auto factorize = [&](bool check_pivots) {
    ldlt.factorize(hth + rho * ltl);
    bool ok = ldlt.info() == Eigen::Success;
    if (ok && check_pivots) {
      const Eigen::VectorXd diag = ldlt.vectorD();
      ok = diag.minCoeff() > 100.0 * std::numeric_limits<double>::epsilon() * diag.cwiseAbs().maxCoeff();
    }
    if (!ok) fail(ErrorCode::kSingularSystem, "H^T H + rho L^T L is numerically singular");
  };
  factorize(true);
  const double rho_initial = rho;

  const double objective_floor = 1e-12 * 0.5 * y.squaredNorm();
  SolveReport report;
  report.solver_used = SolverKind::kAdmm;
  report.alpha_used = rho;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(l.cols());
  Eigen::VectorXd z = Eigen::VectorXd::Zero(l.rows());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(l.rows());
  Eigen::VectorXd lc(l.rows());
  int adjustments = 0;
  const double residual_tol = std::sqrt(cfg.tol);
  report.termination = Termination::kMaxIterations;
  for (std::int64_t k = 0; k < cfg.max_iters; ++k) {
    c = ldlt.solve(hty + rho * l.multiply_transpose(z - w));
    l.multiply_into(c, lc);
    const Eigen::VectorXd z_old = z;
    z = soft_threshold(lc + w, lambda / rho);
    w += lc - z;

    const double primal_res = (lc - z).norm();
    const double dual_res = rho * l.multiply_transpose(z - z_old).norm();
    report.objective_trace.push_back(0.5 * (y - h.multiply(c)).squaredNorm() + lambda * lc.lpNorm<1>());
    report.gap_trace.push_back(primal_res);
    report.iterations = k + 1;

    if (window_converged(report.objective_trace, cfg.window, cfg.tol, objective_floor) &&
        primal_res <= residual_tol * std::max(1.0, lc.norm())) {
      report.termination = Termination::kTolerance;
      break;
    }
    if (l.rows() > 0 && k % 10 == 9 && adjustments < 50) {
      double factor = 1.0;
      if (primal_res > 10.0 * dual_res) factor = 2.0;
      else if (dual_res > 10.0 * primal_res) factor = 0.5;
      if (factor != 1.0 && rho * factor <= 1e3 * rho_initial && rho * factor >= 1e-3 * rho_initial) {
        rho *= factor;
        w /= factor;
        ++adjustments;
        factorize(false);
      }
    }
  }
  report.alpha_used = rho;
  report.c_hat = c;
  return report;
}

SolveReport solve(const Eigen::Ref<const Eigen::VectorXd>& y, const SparseMatrix* h, const SparseMatrix& l,
                  const SolveConfig& cfg) {
  SolverKind kind = cfg.solver_kind;
  if (kind == SolverKind::kAuto) kind = h == nullptr ? SolverKind::kFistaDual : SolverKind::kAdmm;
  if (kind == SolverKind::kFistaDual) {
    if (h != nullptr) fail(ErrorCode::kInvalidArgument, "the FISTA dual solver requires H = I");
    return fista_dual(y, l, cfg);
  }
  if (h == nullptr) return admm_generalized_lasso(y, SparseMatrix::identity(y.size()), l, cfg);
  return admm_generalized_lasso(y, *h, l, cfg);
}

double kkt_residual(const Eigen::Ref<const Eigen::VectorXd>& y, const SparseMatrix& h, const SparseMatrix& l,
                    double lambda, const Eigen::Ref<const Eigen::VectorXd>& c_hat) {
  if (h.rows() != y.size() || h.cols() != c_hat.size() || l.cols() != c_hat.size()) {
    fail(ErrorCode::kDimensionMismatch, "kkt_residual: inconsistent shapes");
  }
  Eigen::VectorXd b = h.multiply_transpose(h.multiply(c_hat) - y);
  if (l.rows() == 0 || lambda == 0.0) return b.lpNorm<Eigen::Infinity>();

  const Eigen::VectorXd r = l.multiply(c_hat);
  const double threshold = kActiveFraction * r.lpNorm<Eigen::Infinity>();
  Eigen::VectorXd signs = Eigen::VectorXd::Zero(l.rows());
  std::vector<std::int64_t> inactive;
  for (std::int64_t i = 0; i < l.rows(); ++i) {
    double magnitude = 0.0;
    const auto cols = l.row_cols(i);
    const auto vals = l.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) magnitude += std::abs(vals[k] * c_hat[cols[k]]);
    if (std::abs(r[i]) > threshold && std::abs(r[i]) > kActiveFloor * magnitude) {
      signs[i] = r[i] > 0 ? 1.0 : -1.0;
    } else {
      inactive.push_back(i);
    }
  }
  b += lambda * l.multiply_transpose(signs);
  if (inactive.empty()) return b.lpNorm<Eigen::Infinity>();

  // min over |v|_inf <= 1 of 1/2 |b + lambda L_I^T v|^2, by accelerated
  // projected gradient with restart. The best inf-norm seen is reported.
  const SparseMatrix li = l.select_rows(inactive);
  const double lip = lambda * lambda * 0.5 * power_iteration_sq_norm(li, 1e-12);
  double best = b.lpNorm<Eigen::Infinity>();
  if (lip == 0.0) return best;
  const double step = 1.0 / (lip * (1.0 + 1e-6));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(li.rows());
  Eigen::VectorXd v_prev = v;
  Eigen::VectorXd x = v;
  double t = 1.0;
  double f_prev = std::numeric_limits<double>::infinity();
  double f_window = f_prev;
  for (int it = 0; it < 200000; ++it) {
    const Eigen::VectorXd res_x = b + lambda * li.multiply_transpose(x);
    v = (x - step * lambda * li.multiply(res_x)).cwiseMax(-1.0).cwiseMin(1.0);
    const Eigen::VectorXd res = b + lambda * li.multiply_transpose(v);
    best = std::min(best, res.lpNorm<Eigen::Infinity>());
    const double f = 0.5 * res.squaredNorm();
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (f > f_prev) {
      x = v;
      t = 1.0;
    } else {
      x = v + ((t - 1.0) / t_new) * (v - v_prev);
      t = t_new;
    }
    v_prev = v;
    f_prev = f;
    if (it % 100 == 99) {
      if (f_window - f <= 1e-15 * std::max(f, 1e-300) || f <= 1e-30) break;
      f_window = f;
    }
  }
  return best;
}

void write_trace_csv(std::ostream& out, const SolveReport& report) {
  out << "iteration,objective,gap\n";
  char buf[96];
  for (std::size_t i = 0; i < report.objective_trace.size(); ++i) {
    const double gap = i < report.gap_trace.size() ? report.gap_trace[i] : 0.0;
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i + 1, report.objective_trace[i], gap);
    out << buf;
  }
}

}  // namespace dhtv
