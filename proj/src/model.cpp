#include "dhtv/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>

#include "dhtv/errors.hpp"
#include "dhtv/hash.hpp"
#include "dhtv/operators.hpp"

namespace dhtv {
namespace {

constexpr char kMagic[8] = {'D', 'H', 'T', 'V', 'C', 'P', 'W', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  /// Fails unless `count` items of `width` bytes remain.
  void need_items(std::uint64_t count, std::uint64_t width) {
    if (width != 0 && count > (bytes_.size() - pos_) / width) truncated();
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  [[noreturn]] static void truncated() { fail(ErrorCode::kCorruptPayload, "model payload is truncated"); }
  void need(std::size_t n) {
    if (n > bytes_.size() - pos_) truncated();
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

double dot_weights(const Triangulation& t, const BarycentricLocation& loc, const Eigen::VectorXd& c) {
  const auto verts = t.simplex(*loc.simplex);
  double f = 0.0;
  for (std::size_t i = 0; i < verts.size(); ++i) f += loc.weights[static_cast<Eigen::Index>(i)] * c[verts[i]];
  return f;
}

}  // namespace

Standardization Standardization::fit(const Eigen::Ref<const Eigen::MatrixXd>& features) {
  if (features.rows() == 0) fail(ErrorCode::kInsufficientData, "cannot standardize an empty feature matrix");
  Standardization s;
  s.mean = features.colwise().mean().transpose();
  s.scale.resize(features.cols());
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    s.scale[j] = std::sqrt((features.col(j).array() - s.mean[j]).square().mean());
    if (!(s.scale[j] > 0.0)) {
      fail(ErrorCode::kDegenerateInput, "feature " + std::to_string(j) + " is constant on the training data");
    }
  }
  return s;
}

Eigen::MatrixXd Standardization::apply(const Eigen::Ref<const Eigen::MatrixXd>& features) const {
  if (features.cols() != mean.size()) {
    fail(ErrorCode::kDimensionMismatch, "expected " + std::to_string(mean.size()) + " features, got " +
                                            std::to_string(features.cols()));
  }
  Eigen::MatrixXd z = features.transpose();
  z.colwise() -= mean;
  z.array().colwise() /= scale.array();
  return z;
}

Eigen::VectorXd Standardization::apply_point(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != mean.size()) {
    fail(ErrorCode::kDimensionMismatch, "expected " + std::to_string(mean.size()) + " features, got " +
                                            std::to_string(x.size()));
  }
  return ((x - mean).array() / scale.array()).matrix();
}

DedupResult deduplicate(const Eigen::Ref<const Eigen::MatrixXd>& standardized,
                        const Eigen::Ref<const Eigen::VectorXd>& targets) {
  const Eigen::Index d = standardized.rows();
  const Eigen::Index m = standardized.cols();
  if (targets.size() != m) fail(ErrorCode::kDimensionMismatch, "deduplicate: targets do not match points");
  std::vector<std::vector<double>> keys(static_cast<std::size_t>(m), std::vector<double>(d));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) keys[i][j] = std::nearbyint(standardized(j, i) * 1e12);
  }
  std::vector<std::int64_t> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  auto lex_point = [&](std::int64_t a, std::int64_t b) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (standardized(j, a) != standardized(j, b)) return standardized(j, a) < standardized(j, b);
    }
    return a < b;
  };
  std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    return lex_point(a, b);
  });

  DedupResult out;
  out.group.assign(static_cast<std::size_t>(m), -1);
  std::vector<Eigen::Index> representative;
  std::vector<double> means;
  for (std::size_t begin = 0; begin < order.size();) {
    std::size_t end = begin + 1;
    while (end < order.size() && keys[order[end]] == keys[order[begin]]) ++end;
    // Within a group the sort above puts the lexicographically smallest
    // unrounded point first.
    std::vector<double> ys;
    for (std::size_t k = begin; k < end; ++k) {
      ys.push_back(targets[order[k]]);
      out.group[order[k]] = static_cast<std::int64_t>(representative.size());
    }
    std::sort(ys.begin(), ys.end());
    means.push_back(std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size()));
    representative.push_back(order[begin]);
    begin = end;
  }
  out.points.resize(d, static_cast<Eigen::Index>(representative.size()));
  out.targets.resize(static_cast<Eigen::Index>(representative.size()));
  for (std::size_t u = 0; u < representative.size(); ++u) {
    out.points.col(static_cast<Eigen::Index>(u)) = standardized.col(representative[u]);
    out.targets[static_cast<Eigen::Index>(u)] = means[u];
  }
  return out;
}

FitProblem prepare_fit(const Dataset& train, const FitOptions& options) {
  train.validate();
  const int d = train.dimension();
  if (d > options.delaunay.max_dimension) {
    fail(ErrorCode::kDimensionTooHigh, "dimension " + std::to_string(d) + " exceeds the supported maximum " +
                                           std::to_string(options.delaunay.max_dimension));
  }
  FitProblem p;
  p.standardization = Standardization::fit(train.features);
  p.n_samples = train.size();
  p.feature_names = train.feature_names;
  p.target_name = train.target_name;
  const Eigen::MatrixXd z = p.standardization.apply(train.features);

  if (options.grid == GridPolicy::kDataPoints) {
    DedupResult dd = deduplicate(z, train.targets);
    if (dd.points.cols() < d + 1) {
      fail(ErrorCode::kInsufficientData, "need at least " + std::to_string(d + 1) + " distinct points, got " +
                                             std::to_string(dd.points.cols()));
    }
    p.triangulation = std::make_shared<const Triangulation>(delaunay(dd.points, options.delaunay));
    p.targets = std::move(dd.targets);
  } else {
    if (options.explicit_grid.cols() != d) {
      fail(ErrorCode::kDimensionMismatch, "explicit grid has " + std::to_string(options.explicit_grid.cols()) +
                                              " columns, data has " + std::to_string(d));
    }
    const Eigen::MatrixXd g = p.standardization.apply(options.explicit_grid);
    DedupResult dd = deduplicate(g, Eigen::VectorXd::Zero(g.cols()));
    if (dd.points.cols() < d + 1) {
      fail(ErrorCode::kInsufficientData, "need at least " + std::to_string(d + 1) + " distinct grid points, got " +
                                             std::to_string(dd.points.cols()));
    }
    p.triangulation = std::make_shared<const Triangulation>(delaunay(dd.points, options.delaunay));
    p.forward = build_forward(*p.triangulation, z);
    p.targets = train.targets;
  }
  p.n_unique = p.triangulation->num_vertices();
  p.regularization = build_regularization(*p.triangulation);
  return p;
}

CpwlModel::CpwlModel(std::shared_ptr<const Triangulation> triangulation, Eigen::VectorXd coefficients,
                     Standardization standardization, double lambda, FitMetadata metadata)
    : triangulation_(std::move(triangulation)),
      coefficients_(std::move(coefficients)),
      standardization_(std::move(standardization)),
      lambda_(lambda),
      metadata_(std::move(metadata)) {
  if (!triangulation_) fail(ErrorCode::kInvalidArgument, "model needs a triangulation");
  if (coefficients_.size() != triangulation_->num_vertices()) {
    fail(ErrorCode::kDimensionMismatch, "one coefficient per vertex is required");
  }
  if (standardization_.mean.size() != triangulation_->dimension() ||
      standardization_.scale.size() != triangulation_->dimension()) {
    fail(ErrorCode::kDimensionMismatch, "standardization does not match the model dimension");
  }
  if (!(standardization_.scale.array() > 0.0).all()) {
    fail(ErrorCode::kInvalidArgument, "standardization scales must be positive");
  }
}

double CpwlModel::evaluate_in_hull(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  const BarycentricLocation loc = triangulation_->locate(z);
  if (!loc.inside()) fail(ErrorCode::kOutsideHull, "point lies outside the convex hull of the grid");
  return dot_weights(*triangulation_, loc, coefficients_);
}

double CpwlModel::predict_standardized(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  return dot_weights(*triangulation_, locate_with_projection(*triangulation_, z), coefficients_);
}

double CpwlModel::predict_one(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return predict_standardized(standardization_.apply_point(x));
}

Eigen::VectorXd CpwlModel::predict(const Eigen::Ref<const Eigen::MatrixXd>& features) const {
  const Eigen::MatrixXd z = standardization_.apply(features);
  Eigen::VectorXd out(z.cols());
  for (Eigen::Index i = 0; i < z.cols(); ++i) out[i] = predict_standardized(z.col(i));
  return out;
}

SparseMatrix CpwlModel::evaluation_operator(const Eigen::Ref<const Eigen::MatrixXd>& features) const {
  return dhtv::evaluation_operator(*triangulation_, standardization_.apply(features));
}

BarycentricLocation locate_with_projection(const Triangulation& t, const Eigen::Ref<const Eigen::VectorXd>& z) {
  BarycentricLocation loc = t.locate(z);
  if (loc.inside()) return loc;
  const Eigen::VectorXd p = t.project_to_hull(z);
  loc = t.locate(p);
  if (loc.inside()) return loc;
  // The projection can land a hair outside the location tolerance; take the
  // simplex whose most negative weight is largest and clamp.
  double best = -std::numeric_limits<double>::infinity();
  for (SimplexId s = 0; s < t.num_simplices(); ++s) {
    const Eigen::VectorXd w = t.barycentric(s, p);
    if (w.minCoeff() > best) {
      best = w.minCoeff();
      loc.simplex = s;
      loc.weights = w;
    }
  }
  loc.weights = loc.weights.cwiseMax(0.0);
  loc.weights /= loc.weights.sum();
  return loc;
}

SparseMatrix evaluation_operator(const Triangulation& t, const Eigen::Ref<const Eigen::MatrixXd>& standardized) {
  if (standardized.rows() != t.dimension()) {
    fail(ErrorCode::kDimensionMismatch, "evaluation_operator: point dimension mismatch");
  }
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(standardized.cols() * (t.dimension() + 1)));
  for (Eigen::Index m = 0; m < standardized.cols(); ++m) {
    const BarycentricLocation loc = locate_with_projection(t, standardized.col(m));
    const auto verts = t.simplex(*loc.simplex);
    for (std::size_t i = 0; i < verts.size(); ++i) {
      const double w = loc.weights[static_cast<Eigen::Index>(i)];
      if (w != 0.0) trips.push_back({m, verts[i], w});
    }
  }
  return SparseMatrix::from_triplets(standardized.cols(), t.num_vertices(), std::move(trips));
}

CpwlModel solve_fit(const FitProblem& problem, const SolveConfig& cfg, const std::optional<Eigen::VectorXd>& initial_dual,
                    SolveReport* report) {
  SolveReport r;
  const SparseMatrix* h = problem.identity_forward() ? nullptr : &problem.forward;
  if (h == nullptr && cfg.solver_kind != SolverKind::kAdmm) {
    r = fista_dual(problem.targets, problem.regularization, cfg, initial_dual);
  } else {
    r = solve(problem.targets, h, problem.regularization, cfg);
  }
  FitMetadata meta;
  meta.solver = r.solver_used;
  meta.termination = r.termination;
  meta.iterations = r.iterations;
  meta.objective = primal_objective(problem.targets, h, problem.regularization, cfg.lambda, r.c_hat);
  meta.htv = problem.regularization.rows() == 0 ? 0.0 : htv(problem.regularization, r.c_hat);
  meta.n_samples = problem.n_samples;
  meta.n_unique = problem.n_unique;
  meta.feature_names = problem.feature_names;
  meta.target_name = problem.target_name;
  CpwlModel model(problem.triangulation, r.c_hat, problem.standardization, cfg.lambda, std::move(meta));
  if (report) *report = std::move(r);
  return model;
}

CpwlModel fit(const Dataset& train, const SolveConfig& cfg, const FitOptions& options) {
  return solve_fit(prepare_fit(train, options), cfg);
}

std::vector<std::uint8_t> CpwlModel::serialize() const {
  const Triangulation& t = *triangulation_;
  const int d = t.dimension();
  ByteWriter w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(d));
  w.u64(static_cast<std::uint64_t>(t.num_vertices()));
  w.u64(static_cast<std::uint64_t>(t.num_simplices()));
  for (Eigen::Index i = 0; i < t.vertices().size(); ++i) w.f64(t.vertices().data()[i]);
  for (VertexId v : t.simplex_data()) w.u32(static_cast<std::uint32_t>(v));
  for (double c : coefficients_) w.f64(c);
  for (int j = 0; j < d; ++j) w.f64(standardization_.mean[j]);
  for (int j = 0; j < d; ++j) w.f64(standardization_.scale[j]);
  w.f64(lambda_);
  w.u8(static_cast<std::uint8_t>(metadata_.solver));
  w.u8(static_cast<std::uint8_t>(metadata_.termination));
  w.i64(metadata_.iterations);
  w.f64(metadata_.objective);
  w.f64(metadata_.htv);
  w.i64(metadata_.n_samples);
  w.i64(metadata_.n_unique);
  w.u32(static_cast<std::uint32_t>(metadata_.feature_names.size()));
  for (const auto& name : metadata_.feature_names) w.str(name);
  w.str(metadata_.target_name);
  const std::uint64_t checksum = fnv1a64(std::span<const std::uint8_t>(w.bytes()));
  w.u64(checksum);
  return std::move(w.bytes());
}

CpwlModel CpwlModel::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic + 4 + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    fail(ErrorCode::kCorruptPayload, "not a model file (bad magic or too short)");
  }
  ByteReader header(bytes.subspan(sizeof kMagic));
  const std::uint32_t version = header.u32();
  if (version != kFormatVersion) {
    fail(ErrorCode::kFormatVersionMismatch, "model format version " + std::to_string(version) + " is not supported (expected " +
                                                std::to_string(kFormatVersion) + ")");
  }
  const auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.last(8));
  if (fnv1a64(body) != tail.u64()) fail(ErrorCode::kCorruptPayload, "model checksum mismatch");

  ByteReader r(body.subspan(sizeof kMagic + 4));
  const std::uint32_t d = r.u32();
  const std::uint64_t n = r.u64();
  const std::uint64_t s = r.u64();
  if (d < 1 || d > 64) fail(ErrorCode::kCorruptPayload, "implausible model dimension");
  r.need_items(n, 8ULL * d);
  Eigen::MatrixXd vertices(d, static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < vertices.size(); ++i) vertices.data()[i] = r.f64();
  r.need_items(s, 4ULL * (d + 1));
  std::vector<VertexId> simplices(static_cast<std::size_t>(s) * (d + 1));
  for (auto& v : simplices) {
    const std::uint32_t id = r.u32();
    if (id >= n) fail(ErrorCode::kCorruptPayload, "simplex references a missing vertex");
    v = static_cast<VertexId>(id);
  }
  r.need_items(n, 8);
  Eigen::VectorXd coefficients(static_cast<Eigen::Index>(n));
  for (auto& c : coefficients) c = r.f64();
  Standardization st;
  st.mean.resize(d);
  st.scale.resize(d);
  for (auto& m : st.mean) m = r.f64();
  for (auto& sc : st.scale) sc = r.f64();
  const double lambda = r.f64();
  FitMetadata meta;
  const std::uint8_t solver = r.u8();
  const std::uint8_t termination = r.u8();
  if (solver > static_cast<std::uint8_t>(SolverKind::kAdmm) ||
      termination > static_cast<std::uint8_t>(Termination::kMaxIterations)) {
    fail(ErrorCode::kCorruptPayload, "unknown solver or termination tag");
  }
  meta.solver = static_cast<SolverKind>(solver);
  meta.termination = static_cast<Termination>(termination);
  meta.iterations = r.i64();
  meta.objective = r.f64();
  meta.htv = r.f64();
  meta.n_samples = r.i64();
  meta.n_unique = r.i64();
  const std::uint32_t names = r.u32();
  r.need_items(names, 4);
  for (std::uint32_t i = 0; i < names; ++i) meta.feature_names.push_back(r.str());
  meta.target_name = r.str();
  if (r.remaining() != 0) fail(ErrorCode::kCorruptPayload, "trailing bytes after model payload");
  try {
    auto tri = std::make_shared<const Triangulation>(std::move(vertices), std::move(simplices));
    return CpwlModel(std::move(tri), std::move(coefficients), std::move(st), lambda, std::move(meta));
  } catch (const Error& e) {
    fail(ErrorCode::kCorruptPayload, std::string("invalid model contents: ") + e.what());
  }
}

void CpwlModel::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIoError, "failed writing " + path.string());
}

CpwlModel CpwlModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot read " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace dhtv
