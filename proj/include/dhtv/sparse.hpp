#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace dhtv {

struct Triplet {
  std::int64_t row;
  std::int64_t col;
  double value;
};

/// Row-compressed real matrix. Used for the forward operator H and the
/// regularization operator L; rows are never reordered after assembly.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::int64_t rows, std::int64_t cols);

  /// Duplicate (row, col) entries are summed; explicit zeros are kept.
  static SparseMatrix from_triplets(std::int64_t rows, std::int64_t cols,
                                    std::vector<Triplet> triplets);
  static SparseMatrix identity(std::int64_t n);

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(values_.size()); }

  std::span<const std::int64_t> row_cols(std::int64_t r) const;
  std::span<const double> row_values(std::int64_t r) const;
  std::int64_t row_nnz(std::int64_t r) const { return row_ptr_[r + 1] - row_ptr_[r]; }
  std::int64_t max_row_nnz() const;

  /// y = A x
  Eigen::VectorXd multiply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// y = A^T x
  Eigen::VectorXd multiply_transpose(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  void multiply_into(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> y) const;
  void multiply_transpose_into(const Eigen::Ref<const Eigen::VectorXd>& x,
                               Eigen::Ref<Eigen::VectorXd> y) const;

  /// Keeps only the listed rows, in the given order.
  SparseMatrix select_rows(std::span<const std::int64_t> rows) const;

  std::vector<Triplet> to_triplets() const;
  Eigen::SparseMatrix<double> to_eigen() const;
  Eigen::MatrixXd to_dense() const;

  /// Text triplet format: a "rows cols nnz" header line followed by one
  /// "row col value" line per stored entry (0-based, %.17g).
  void write_triplets(std::ostream& out) const;
  static SparseMatrix read_triplets(std::istream& in);

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::vector<std::int64_t> row_ptr_{0};
  std::vector<std::int64_t> col_idx_;
  std::vector<double> values_;
};

}  // namespace dhtv
