#include "dhtv/sparse.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "dhtv/errors.hpp"

namespace dhtv {

SparseMatrix::SparseMatrix(std::int64_t rows, std::int64_t cols)
    : rows_(rows), cols_(cols), row_ptr_(static_cast<std::size_t>(rows) + 1, 0) {}

SparseMatrix SparseMatrix::from_triplets(std::int64_t rows, std::int64_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      fail(ErrorCode::kDimensionMismatch, "triplet index out of range");
    }
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  SparseMatrix m(rows, cols);
  m.col_idx_.reserve(triplets.size());
  m.values_.reserve(triplets.size());
  std::vector<std::int64_t> counts(static_cast<std::size_t>(rows), 0);
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (!m.col_idx_.empty() && i > 0 && triplets[i - 1].row == t.row &&
        triplets[i - 1].col == t.col) {
      m.values_.back() += t.value;
      continue;
    }
    m.col_idx_.push_back(t.col);
    m.values_.push_back(t.value);
    ++counts[static_cast<std::size_t>(t.row)];
  }
  for (std::int64_t r = 0; r < rows; ++r) {
    m.row_ptr_[r + 1] = m.row_ptr_[r] + counts[static_cast<std::size_t>(r)];
  }
  return m;
}

SparseMatrix SparseMatrix::identity(std::int64_t n) {
  SparseMatrix m(n, n);
  m.col_idx_.resize(static_cast<std::size_t>(n));
  m.values_.assign(static_cast<std::size_t>(n), 1.0);
  for (std::int64_t i = 0; i < n; ++i) {
    m.col_idx_[i] = i;
    m.row_ptr_[i + 1] = i + 1;
  }
  return m;
}

std::span<const std::int64_t> SparseMatrix::row_cols(std::int64_t r) const {
  return {col_idx_.data() + row_ptr_[r], static_cast<std::size_t>(row_nnz(r))};
}

std::span<const double> SparseMatrix::row_values(std::int64_t r) const {
  return {values_.data() + row_ptr_[r], static_cast<std::size_t>(row_nnz(r))};
}

std::int64_t SparseMatrix::max_row_nnz() const {
  std::int64_t best = 0;
  for (std::int64_t r = 0; r < rows_; ++r) best = std::max(best, row_nnz(r));
  return best;
}

void SparseMatrix::multiply_into(const Eigen::Ref<const Eigen::VectorXd>& x,
                                 Eigen::Ref<Eigen::VectorXd> y) const {
  if (x.size() != cols_ || y.size() != rows_) {
    fail(ErrorCode::kDimensionMismatch, "sparse multiply: shape mismatch");
  }
  for (std::int64_t r = 0; r < rows_; ++r) {
    double acc = 0.0;
    for (std::int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      acc += values_[k] * x[col_idx_[k]];
    }
    y[r] = acc;
  }
}

void SparseMatrix::multiply_transpose_into(const Eigen::Ref<const Eigen::VectorXd>& x,
                                           Eigen::Ref<Eigen::VectorXd> y) const {
  if (x.size() != rows_ || y.size() != cols_) {
    fail(ErrorCode::kDimensionMismatch, "sparse transpose multiply: shape mismatch");
  }
  y.setZero();
  for (std::int64_t r = 0; r < rows_; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (std::int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      y[col_idx_[k]] += values_[k] * xr;
    }
  }
}

Eigen::VectorXd SparseMatrix::multiply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd y(rows_);
  multiply_into(x, y);
  return y;
}

Eigen::VectorXd SparseMatrix::multiply_transpose(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd y(cols_);
  multiply_transpose_into(x, y);
  return y;
}

SparseMatrix SparseMatrix::select_rows(std::span<const std::int64_t> rows) const {
  SparseMatrix m(static_cast<std::int64_t>(rows.size()), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::int64_t r = rows[i];
    if (r < 0 || r >= rows_) fail(ErrorCode::kDimensionMismatch, "select_rows: bad row");
    for (std::int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      m.col_idx_.push_back(col_idx_[k]);
      m.values_.push_back(values_[k]);
    }
    m.row_ptr_[i + 1] = static_cast<std::int64_t>(m.values_.size());
  }
  return m;
}

std::vector<Triplet> SparseMatrix::to_triplets() const {
  std::vector<Triplet> out;
  out.reserve(values_.size());
  for (std::int64_t r = 0; r < rows_; ++r) {
    for (std::int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      out.push_back({r, col_idx_[k], values_[k]});
    }
  }
  return out;
}

Eigen::SparseMatrix<double> SparseMatrix::to_eigen() const {
  std::vector<Eigen::Triplet<double>> ts;
  ts.reserve(values_.size());
  for (const auto& t : to_triplets()) {
    ts.emplace_back(static_cast<int>(t.row), static_cast<int>(t.col), t.value);
  }
  Eigen::SparseMatrix<double> m(rows_, cols_);
  m.setFromTriplets(ts.begin(), ts.end());
  return m;
}

Eigen::MatrixXd SparseMatrix::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows_, cols_);
  for (const auto& t : to_triplets()) m(t.row, t.col) += t.value;
  return m;
}

void SparseMatrix::write_triplets(std::ostream& out) const {
  out << rows_ << ' ' << cols_ << ' ' << nnz() << '\n';
  char buf[64];
  for (const auto& t : to_triplets()) {
    std::snprintf(buf, sizeof buf, "%.17g", t.value);
    out << t.row << ' ' << t.col << ' ' << buf << '\n';
  }
}

SparseMatrix SparseMatrix::read_triplets(std::istream& in) {
  std::int64_t rows = 0, cols = 0, nnz = 0;
  if (!(in >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0) {
    fail(ErrorCode::kParseError, "triplet header: expected 'rows cols nnz'");
  }
  std::vector<Triplet> ts(static_cast<std::size_t>(nnz));
  for (auto& t : ts) {
    if (!(in >> t.row >> t.col >> t.value)) {
      fail(ErrorCode::kParseError, "triplet body truncated");
    }
  }
  return from_triplets(rows, cols, std::move(ts));
}

}  // namespace dhtv
