#pragma once

#include <cstdint>
#include <span>

namespace dhtv::detail {

// All predicates are exact: a floating-point evaluation is accepted when it
// clears a Hadamard-relative error filter, otherwise the determinant is
// recomputed in rational arithmetic.

/// Sign of det[[p_0 1]; ...; [p_d 1]] for d+1 points in R^d.
int orient(std::span<const double* const> pts, int dim);

/// Sign of the lifted determinant det[[p_i - q, |p_i - q|^2]]_{i=0..d}.
/// Positive times orient(pts) means q is strictly inside the circumsphere.
int lifted_sign(std::span<const double* const> pts, const double* q, int dim);

/// In-sphere test with symbolic perturbation of the paraboloid lift. Each
/// point's lift is raised by eps^(rank of its id), so lower ids dominate.
/// Returns +1 if q is inside the circumsphere of pts, -1 if outside; never 0
/// for a non-degenerate simplex.
int insphere(std::span<const double* const> pts, std::span<const std::int64_t> ids,
             const double* q, std::int64_t q_id, int dim);

/// Number of times the exact fallback ran (diagnostics).
std::int64_t exact_fallback_count();

}  // namespace dhtv::detail
