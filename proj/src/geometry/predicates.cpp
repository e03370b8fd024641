#include "geometry/predicates.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <vector>

#include <gmpxx.h>

namespace dhtv::detail {
namespace {

constexpr int kMaxOrder = 12;
constexpr double kFilter = 1e-9;

std::atomic<std::int64_t> g_exact_calls{0};

// Returns +1/-1 when the double-precision LU determinant is trustworthy,
// 0 when the filter cannot decide. `a` is row-major n x n and is destroyed.
int filtered_det_sign(double* a, int n) {
  // Rescaling a row by a power of two is exact and keeps the sign.
  double hadamard = 1.0;
  for (int i = 0; i < n; ++i) {
    double* row = a + i * n;
    double mx = 0.0;
    for (int j = 0; j < n; ++j) mx = std::max(mx, std::abs(row[j]));
    if (mx == 0.0) return 0;
    int e = 0;
    std::frexp(mx, &e);
    double norm2 = 0.0;
    for (int j = 0; j < n; ++j) {
      row[j] = std::ldexp(row[j], -e);
      norm2 += row[j] * row[j];
    }
    hadamard *= std::sqrt(norm2);
  }
  double det = 1.0;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::abs(a[k * n + k]);
    for (int i = k + 1; i < n; ++i) {
      const double v = std::abs(a[i * n + k]);
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (best == 0.0) return 0;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(a[k * n + j], a[piv * n + j]);
      det = -det;
    }
    const double pk = a[k * n + k];
    det *= pk;
    for (int i = k + 1; i < n; ++i) {
      const double f = a[i * n + k] / pk;
      if (f == 0.0) continue;
      for (int j = k + 1; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
    }
  }
  if (std::abs(det) > kFilter * hadamard) return det > 0 ? 1 : -1;
  return 0;
}

int exact_det_sign(std::vector<mpq_class>& a, int n) {
  g_exact_calls.fetch_add(1, std::memory_order_relaxed);
  int sign = 1;
  for (int k = 0; k < n; ++k) {
    int piv = -1;
    for (int i = k; i < n; ++i) {
      if (sgn(a[i * n + k]) != 0) {
        piv = i;
        break;
      }
    }
    if (piv < 0) return 0;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(a[k * n + j], a[piv * n + j]);
      sign = -sign;
    }
    if (sgn(a[k * n + k]) < 0) sign = -sign;
    for (int i = k + 1; i < n; ++i) {
      if (sgn(a[i * n + k]) == 0) continue;
      const mpq_class f = a[i * n + k] / a[k * n + k];
      for (int j = k + 1; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
    }
  }
  return sign;
}

// det[[p_0 1]; ...; [p_d 1]] == (-1)^d det[p_i - p_0]_{i=1..d}.
int orient_impl(std::span<const double* const> pts, int dim) {
  const int n = dim;
  std::array<double, kMaxOrder * kMaxOrder> a{};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a[i * n + j] = pts[i + 1][j] - pts[0][j];
  }
  int s = filtered_det_sign(a.data(), n);
  if (s == 0) {
    std::vector<mpq_class> q(static_cast<std::size_t>(n * n));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        q[i * n + j] = mpq_class(pts[i + 1][j]) - mpq_class(pts[0][j]);
      }
    }
    s = exact_det_sign(q, n);
  }
  return (dim % 2 == 0) ? s : -s;
}

}  // namespace

int orient(std::span<const double* const> pts, int dim) { return orient_impl(pts, dim); }

int lifted_sign(std::span<const double* const> pts, const double* q, int dim) {
  const int n = dim + 1;
  std::array<double, kMaxOrder * kMaxOrder> a{};
  for (int i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int j = 0; j < dim; ++j) {
      const double diff = pts[i][j] - q[j];
      a[i * n + j] = diff;
      sq += diff * diff;
    }
    a[i * n + dim] = sq;
  }
  int s = filtered_det_sign(a.data(), n);
  if (s != 0) return s;
  std::vector<mpq_class> m(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i) {
    mpq_class sq = 0;
    for (int j = 0; j < dim; ++j) {
      mpq_class diff = mpq_class(pts[i][j]) - mpq_class(q[j]);
      sq += diff * diff;
      m[i * n + j] = diff;
    }
    m[i * n + dim] = sq;
  }
  return exact_det_sign(m, n);
}

int insphere(std::span<const double* const> pts, std::span<const std::int64_t> ids,
             const double* q, std::int64_t q_id, int dim) {
  const int cell_orient = orient_impl(pts, dim);
  int d_sign = lifted_sign(pts, q, dim);
  if (d_sign == 0) {
    // Lifted matrix rows are (p_0..p_d, q) with the lift in column d. The
    // coefficient of eps_j is (-1)^(j+d) times the orientation of the
    // remaining d+1 points, taken in row order.
    std::array<std::pair<std::int64_t, int>, kMaxOrder> order{};
    const int rows = dim + 2;
    for (int j = 0; j <= dim; ++j) order[j] = {ids[j], j};
    order[dim + 1] = {q_id, dim + 1};
    std::sort(order.begin(), order.begin() + rows);
    std::array<const double*, kMaxOrder> sub{};
    for (int r = 0; r < rows && d_sign == 0; ++r) {
      const int j = order[r].second;
      int o = 0;
      if (j == dim + 1) {
        o = cell_orient;
      } else {
        int k = 0;
        for (int i = 0; i <= dim; ++i) {
          if (i != j) sub[k++] = pts[i];
        }
        sub[k++] = q;
        o = orient_impl(std::span<const double* const>(sub.data(), k), dim);
      }
      if (o != 0) d_sign = ((j + dim) % 2 == 0) ? o : -o;
    }
  }
  return d_sign * cell_orient;
}

std::int64_t exact_fallback_count() { return g_exact_calls.load(); }

}  // namespace dhtv::detail
