#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dhtv/errors.hpp"
#include "dhtv/geometry.hpp"
#include "geometry/predicates.hpp"

namespace dhtv {
namespace {

constexpr std::int32_t kInfinite = -1;
constexpr int kMaxK = 12;

using FacetKey = std::array<std::int32_t, kMaxK>;

// Incremental Bowyer-Watson over a triangulation closed by a vertex at
// infinity: every hull facet carries an infinite cell. All cells (finite or
// not) are positively oriented, treating the infinite vertex as a point far
// beyond the hull facet.
class DelaunayBuilder {
 public:
  explicit DelaunayBuilder(const Eigen::MatrixXd& points)
      : points_(points), dim_(static_cast<int>(points.rows())), k_(dim_ + 1) {}

  std::vector<VertexId> run() {
    const std::vector<std::int32_t> initial = initial_simplex();
    build_initial(initial);
    std::vector<char> used(static_cast<std::size_t>(points_.cols()), 0);
    for (auto v : initial) used[v] = 1;
    for (std::int32_t v : insertion_order(used)) insert(v);

    std::vector<VertexId> out;
    for (std::int32_t c = 0; c < num_cells(); ++c) {
      if (!alive_[c] || is_infinite(c)) continue;
      out.insert(out.end(), verts_.begin() + c * k_, verts_.begin() + (c + 1) * k_);
    }
    return out;
  }

 private:
  const double* coords(std::int32_t v) const { return points_.data() + static_cast<std::ptrdiff_t>(v) * dim_; }
  std::int32_t num_cells() const { return static_cast<std::int32_t>(alive_.size()); }
  std::int32_t vert(std::int32_t c, int i) const { return verts_[c * k_ + i]; }
  std::int32_t& nbr(std::int32_t c, int i) { return nbrs_[c * k_ + i]; }

  int infinite_slot(std::int32_t c) const {
    for (int i = 0; i < k_; ++i) {
      if (vert(c, i) == kInfinite) return i;
    }
    return -1;
  }
  bool is_infinite(std::int32_t c) const { return infinite_slot(c) >= 0; }

  // Orientation of cell c with slot `slot` replaced by point p.
  int orient_replaced(std::int32_t c, int slot, std::int32_t p) const {
    std::array<const double*, kMaxK> pts{};
    for (int i = 0; i < k_; ++i) pts[i] = (i == slot) ? coords(p) : coords(vert(c, i));
    return detail::orient(std::span<const double* const>(pts.data(), k_), dim_);
  }

  bool finite_conflict(std::int32_t c, std::int32_t p) const {
    std::array<const double*, kMaxK> pts{};
    std::array<std::int64_t, kMaxK> ids{};
    for (int i = 0; i < k_; ++i) {
      pts[i] = coords(vert(c, i));
      ids[i] = vert(c, i);
    }
    return detail::insphere(std::span<const double* const>(pts.data(), k_),
                            std::span<const std::int64_t>(ids.data(), k_), coords(p), p, dim_) > 0;
  }

  bool conflict(std::int32_t c, std::int32_t p) {
    const int inf = infinite_slot(c);
    if (inf < 0) return finite_conflict(c, p);
    const int o = orient_replaced(c, inf, p);
    if (o != 0) return o > 0;
    // p lies on the hull facet's hyperplane: conflict iff it is inside the
    // facet's circumsphere, which the finite neighbour decides.
    return finite_conflict(nbr(c, inf), p);
  }

  std::int32_t new_cell() {
    if (!free_.empty()) {
      const std::int32_t c = free_.back();
      free_.pop_back();
      alive_[c] = 1;
      return c;
    }
    verts_.resize(verts_.size() + k_, kInfinite);
    nbrs_.resize(nbrs_.size() + k_, -1);
    alive_.push_back(1);
    mark_.push_back(0);
    return num_cells() - 1;
  }

  // Choose d+1 well-spread, affinely independent points greedily.
  std::vector<std::int32_t> initial_simplex() const {
    const auto n = points_.cols();
    std::vector<std::int32_t> chosen{0};
    Eigen::MatrixXd basis(dim_, 0);
    const Eigen::VectorXd origin = points_.col(0);
    for (int step = 0; step < dim_; ++step) {
      double best = 0.0;
      std::int32_t best_v = -1;
      for (Eigen::Index v = 0; v < n; ++v) {
        Eigen::VectorXd r = points_.col(v) - origin;
        if (basis.cols() > 0) r -= basis * (basis.transpose() * r);
        const double len = r.norm();
        if (len > best) {
          best = len;
          best_v = static_cast<std::int32_t>(v);
        }
      }
      if (best_v < 0 || best <= 1e-14 * (points_.col(best_v < 0 ? 0 : best_v) - origin).norm()) {
        fail(ErrorCode::kDegenerateInput, "points are affinely dependent");
      }
      Eigen::VectorXd r = points_.col(best_v) - origin;
      if (basis.cols() > 0) r -= basis * (basis.transpose() * r);
      basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
      basis.col(basis.cols() - 1) = r.normalized();
      chosen.push_back(best_v);
    }
    std::array<const double*, kMaxK> pts{};
    for (int i = 0; i < k_; ++i) pts[i] = coords(chosen[i]);
    if (detail::orient(std::span<const double* const>(pts.data(), k_), dim_) == 0) {
      fail(ErrorCode::kDegenerateInput, "points are affinely dependent");
    }
    return chosen;
  }

  void build_initial(std::vector<std::int32_t> simplex) {
    std::array<const double*, kMaxK> pts{};
    for (int i = 0; i < k_; ++i) pts[i] = coords(simplex[i]);
    if (detail::orient(std::span<const double* const>(pts.data(), k_), dim_) < 0) {
      std::swap(simplex[0], simplex[1]);
    }
    std::vector<std::int32_t> cells;
    const std::int32_t c0 = new_cell();
    std::copy(simplex.begin(), simplex.end(), verts_.begin() + c0 * k_);
    cells.push_back(c0);
    for (int i = 0; i < k_; ++i) {
      const std::int32_t c = new_cell();
      for (int j = 0; j < k_; ++j) verts_[c * k_ + j] = simplex[j];
      verts_[c * k_ + i] = kInfinite;
      // Flip so the infinite vertex counts as lying beyond facet i.
      std::swap(verts_[c * k_], verts_[c * k_ + 1]);
      cells.push_back(c);
    }
    link(cells);
    hint_ = c0;
  }

  // Pair up the facets of `cells` that have no neighbour assigned yet.
  void link(const std::vector<std::int32_t>& cells) {
    struct Rec {
      FacetKey key;
      std::int32_t cell;
      int slot;
    };
    std::vector<Rec> recs;
    recs.reserve(cells.size() * k_);
    for (std::int32_t c : cells) {
      for (int i = 0; i < k_; ++i) {
        if (nbr(c, i) >= 0) continue;
        Rec r{{}, c, i};
        r.key.fill(std::numeric_limits<std::int32_t>::max());
        int m = 0;
        for (int j = 0; j < k_; ++j) {
          if (j != i) r.key[m++] = vert(c, j);
        }
        std::sort(r.key.begin(), r.key.begin() + dim_);
        recs.push_back(r);
      }
    }
    std::sort(recs.begin(), recs.end(), [](const Rec& a, const Rec& b) {
      return a.key != b.key ? a.key < b.key : a.cell < b.cell;
    });
    for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
      if (recs[i].key == recs[i + 1].key) {
        nbr(recs[i].cell, recs[i].slot) = recs[i + 1].cell;
        nbr(recs[i + 1].cell, recs[i + 1].slot) = recs[i].cell;
        ++i;
      }
    }
  }

  std::vector<std::int32_t> insertion_order(const std::vector<char>& used) const {
    const auto n = points_.cols();
    const int bits = std::min(21, 63 / dim_);
    const double cells_per_axis = std::ldexp(1.0, bits) - 1.0;
    const Eigen::VectorXd lo = points_.rowwise().minCoeff();
    const Eigen::VectorXd span = (points_.rowwise().maxCoeff() - lo).cwiseMax(1e-300);
    std::vector<std::pair<std::uint64_t, std::int32_t>> keyed;
    for (Eigen::Index v = 0; v < n; ++v) {
      if (used[v]) continue;
      std::uint64_t key = 0;
      std::array<std::uint64_t, kMaxK> q{};
      for (int j = 0; j < dim_; ++j) {
        q[j] = static_cast<std::uint64_t>((points_(j, v) - lo[j]) / span[j] * cells_per_axis);
      }
      for (int b = bits - 1; b >= 0; --b) {
        for (int j = 0; j < dim_; ++j) key = (key << 1) | ((q[j] >> b) & 1u);
      }
      keyed.emplace_back(key, static_cast<std::int32_t>(v));
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::int32_t> order;
    order.reserve(keyed.size());
    for (const auto& kv : keyed) order.push_back(kv.second);
    return order;
  }

  // Visibility walk towards p; returns a cell in conflict with p.
  std::int32_t locate_conflict(std::int32_t p) {
    std::int32_t c = hint_;
    if (!alive_[c]) c = first_alive();
    if (const int inf = infinite_slot(c); inf >= 0) c = nbr(c, inf);
    const std::int64_t limit = 4 * static_cast<std::int64_t>(num_cells()) + 64;
    int rotate = 0;
    for (std::int64_t step = 0; step < limit; ++step) {
      if (is_infinite(c)) return c;
      bool moved = false;
      for (int t = 0; t < k_; ++t) {
        const int i = (t + rotate) % k_;
        if (orient_replaced(c, i, p) < 0) {
          c = nbr(c, i);
          moved = true;
          break;
        }
      }
      if (!moved) return c;
      rotate = (rotate + 1) % k_;
    }
    for (std::int32_t d = 0; d < num_cells(); ++d) {
      if (alive_[d] && conflict(d, p)) return d;
    }
    fail(ErrorCode::kDegenerateInput, "delaunay: no conflicting cell found");
  }

  std::int32_t first_alive() const {
    for (std::int32_t c = 0; c < num_cells(); ++c) {
      if (alive_[c]) return c;
    }
    return 0;
  }

  void insert(std::int32_t p) {
    const std::int32_t start = locate_conflict(p);
    ++stamp_;
    std::vector<std::int32_t> cavity{start};
    std::vector<std::int32_t> stack{start};
    mark_[start] = stamp_;
    struct Boundary {
      std::int32_t cell;
      int slot;
      std::int32_t outside;
    };
    std::vector<Boundary> boundary;
    std::vector<std::int32_t> rejected;
    while (!stack.empty()) {
      const std::int32_t c = stack.back();
      stack.pop_back();
      for (int i = 0; i < k_; ++i) {
        const std::int32_t n = nbr(c, i);
        if (mark_[n] == stamp_) continue;
        if (std::find(rejected.begin(), rejected.end(), n) == rejected.end() && conflict(n, p)) {
          mark_[n] = stamp_;
          cavity.push_back(n);
          stack.push_back(n);
        } else {
          if (std::find(rejected.begin(), rejected.end(), n) == rejected.end()) rejected.push_back(n);
          boundary.push_back({c, i, n});
        }
      }
    }

    std::vector<std::int32_t> created;
    created.reserve(boundary.size());
    for (const auto& b : boundary) {
      const std::int32_t nc = new_cell();
      for (int j = 0; j < k_; ++j) {
        verts_[nc * k_ + j] = vert(b.cell, j);
        nbrs_[nc * k_ + j] = -1;
      }
      verts_[nc * k_ + b.slot] = p;
      nbr(nc, b.slot) = b.outside;
      for (int j = 0; j < k_; ++j) {
        if (nbr(b.outside, j) == b.cell) {
          nbr(b.outside, j) = nc;
          break;
        }
      }
      created.push_back(nc);
    }
    for (std::int32_t c : cavity) {
      alive_[c] = 0;
      free_.push_back(c);
    }
    link(created);
    hint_ = created.front();
    for (std::int32_t c : created) {
      if (!is_infinite(c)) {
        hint_ = c;
        break;
      }
    }
  }

  const Eigen::MatrixXd& points_;
  int dim_;
  int k_;
  std::vector<std::int32_t> verts_;
  std::vector<std::int32_t> nbrs_;
  std::vector<char> alive_;
  std::vector<std::uint32_t> mark_;
  std::vector<std::int32_t> free_;
  std::uint32_t stamp_ = 0;
  std::int32_t hint_ = 0;
};

void check_input(const Eigen::Ref<const Eigen::MatrixXd>& points, const DelaunayOptions& options) {
  const auto d = points.rows();
  if (d < 1) fail(ErrorCode::kDegenerateInput, "points must have dimension >= 1");
  if (d > options.max_dimension || d + 1 > kMaxK - 1) {
    fail(ErrorCode::kDimensionTooHigh,
         "dimension " + std::to_string(d) + " exceeds limit " + std::to_string(options.max_dimension));
  }
  if (!points.allFinite()) fail(ErrorCode::kDegenerateInput, "points must be finite");
  if (points.cols() < d + 1) {
    fail(ErrorCode::kDegenerateInput, "need at least d+1 points for a triangulation");
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(points.cols()));
  std::iota(idx.begin(), idx.end(), 0);
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (points(j, a) != points(j, b)) return points(j, a) < points(j, b);
    }
    return false;
  };
  std::sort(idx.begin(), idx.end(), less);
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (!less(idx[i - 1], idx[i])) {
      fail(ErrorCode::kDegenerateInput, "duplicate points " + std::to_string(idx[i - 1]) + " and " +
                                            std::to_string(idx[i]));
    }
  }
}

// Hadamard ratio |det E| / prod |e_i| of the edge matrix from the first
// vertex: 1 for orthogonal edges, 0 for a flat simplex, independent of scale
// and dimension.
double min_shape_quality(const Triangulation& t) {
  const int d = t.dimension();
  double worst = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd edges(d, d);
  for (SimplexId s = 0; s < t.num_simplices(); ++s) {
    const auto verts = t.simplex(s);
    double norms = 1.0;
    for (int i = 1; i <= d; ++i) {
      edges.col(i - 1) = t.vertex(verts[i]) - t.vertex(verts[0]);
      norms *= edges.col(i - 1).norm();
    }
    worst = std::min(worst, std::abs(edges.determinant()) / norms);
  }
  return worst;
}

}  // namespace

Triangulation delaunay(const Eigen::Ref<const Eigen::MatrixXd>& points, const DelaunayOptions& options) {
  check_input(points, options);
  Eigen::MatrixXd work = points;
  const double diagonal = (work.rowwise().maxCoeff() - work.rowwise().minCoeff()).norm();

  for (int attempt = 0;; ++attempt) {
    std::vector<VertexId> simplices = DelaunayBuilder(work).run();
    bool degenerate = false;
    std::optional<Triangulation> tri;
    try {
      tri.emplace(work, std::move(simplices));
      degenerate = min_shape_quality(*tri) < options.degeneracy_tolerance;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateInput) throw;
      degenerate = true;
    }
    if (!degenerate) return std::move(*tri);
    if (attempt >= options.joggle_attempts) {
      fail(ErrorCode::kDegenerateInput, "triangulation contains a near-degenerate simplex");
    }
    // Joggle: deterministic uniform noise relative to the bounding box.
    const double magnitude = diagonal * std::pow(10.0, -10.0 + 2.0 * attempt);
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(attempt));
    work = points;
    for (Eigen::Index i = 0; i < work.size(); ++i) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      work.data()[i] += magnitude * (2.0 * u - 1.0);
    }
  }
}

}  // namespace dhtv
