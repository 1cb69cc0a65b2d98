#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "linproj/errors.hpp"
#include "linproj/vector_ops.hpp"

namespace linproj {

enum class Realization { dense, csr, block_diagonal };

/// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols, Vector entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    detail::require(entries_.size() == rows_ * cols_, "DenseMatrix: entries length != rows*cols");
    detail::require(all_finite(entries_), "DenseMatrix: non-finite entry");
  }

  static DenseMatrix zeros(std::size_t rows, std::size_t cols) {
    return DenseMatrix(rows, cols, Vector(rows * cols, 0.0));
  }

  static DenseMatrix identity(std::size_t n) {
    Vector e(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) e[i * n + i] = 1.0;
    return DenseMatrix(n, n, std::move(e));
  }

  /// Builds from a list of rows; every row must have `cols` entries.
  static DenseMatrix from_rows(const std::vector<Vector>& rows, std::size_t cols) {
    Vector e;
    e.reserve(rows.size() * cols);
    for (const auto& r : rows) {
      detail::require(r.size() == cols, "DenseMatrix::from_rows: ragged row");
      e.insert(e.end(), r.begin(), r.end());
    }
    return DenseMatrix(rows.size(), cols, std::move(e));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  const Vector& entries() const noexcept { return entries_; }

  double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

  void apply(std::span<const double> v, std::span<double> out) const {
    for (std::size_t i = 0; i < rows_; ++i) {
      const double* row = entries_.data() + i * cols_;
      double s = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) s += row[j] * v[j];
      out[i] = s;
    }
  }

  void apply_transpose(std::span<const double> w, std::span<double> out) const {
    for (std::size_t j = 0; j < cols_; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      const double* row = entries_.data() + i * cols_;
      const double wi = w[i];
      for (std::size_t j = 0; j < cols_; ++j) out[j] += row[j] * wi;
    }
  }

  template <class F>
  void for_each_entry(F&& f) const {
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) f(i, j, entries_[i * cols_ + j]);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector entries_;
};

/// Compressed-sparse-row matrix with strictly increasing column indices per row.
class CsrMatrix {
 public:
  CsrMatrix() : row_offsets_{0} {}

  CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
            std::vector<std::size_t> col_indices, Vector values)
      : rows_(rows),
        cols_(cols),
        row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)),
        values_(std::move(values)) {
    validate();
  }

  /// Accepts (row, col, value) triplets in any order; duplicates are summed
  /// and explicit zeros are kept so the pattern is what the caller gave.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols,
                                 std::vector<std::tuple<std::size_t, std::size_t, double>> triplets) {
    for (const auto& [i, j, v] : triplets)
      detail::require(i < rows && j < cols, "CsrMatrix::from_triplets: index out of range");
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    std::vector<std::size_t> offsets(rows + 1, 0);
    std::vector<std::size_t> cols_out;
    Vector vals;
    for (std::size_t k = 0; k < triplets.size(); ++k) {
      const auto [i, j, v] = triplets[k];
      if (!cols_out.empty() && k > 0 && std::get<0>(triplets[k - 1]) == i &&
          std::get<1>(triplets[k - 1]) == j) {
        vals.back() += v;
        continue;
      }
      cols_out.push_back(j);
      vals.push_back(v);
      ++offsets[i + 1];
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    return CsrMatrix(rows, cols, std::move(offsets), std::move(cols_out), std::move(vals));
  }

  /// Stores only the nonzero entries of `d`.
  static CsrMatrix from_dense(const DenseMatrix& d) {
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> idx;
    Vector vals;
    for (std::size_t i = 0; i < d.rows(); ++i) {
      for (std::size_t j = 0; j < d.cols(); ++j) {
        if (d(i, j) != 0.0) {
          idx.push_back(j);
          vals.push_back(d(i, j));
        }
      }
      offsets.push_back(idx.size());
    }
    return CsrMatrix(d.rows(), d.cols(), std::move(offsets), std::move(idx), std::move(vals));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  const std::vector<std::size_t>& row_offsets() const noexcept { return row_offsets_; }
  const std::vector<std::size_t>& col_indices() const noexcept { return col_indices_; }
  const Vector& values() const noexcept { return values_; }

  void apply(std::span<const double> v, std::span<double> out) const {
    for (std::size_t i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
        s += values_[k] * v[col_indices_[k]];
      out[i] = s;
    }
  }

  void apply_transpose(std::span<const double> w, std::span<double> out) const {
    for (std::size_t j = 0; j < cols_; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      const double wi = w[i];
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
        out[col_indices_[k]] += values_[k] * wi;
    }
  }

  template <class F>
  void for_each_entry(F&& f) const {
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
        f(i, col_indices_[k], values_[k]);
  }

 private:
  void validate() const {
    detail::require(row_offsets_.size() == rows_ + 1, "CsrMatrix: row_offsets length != rows+1");
    detail::require(row_offsets_.front() == 0, "CsrMatrix: row_offsets[0] != 0");
    detail::require(row_offsets_.back() == col_indices_.size(), "CsrMatrix: row_offsets end != nnz");
    detail::require(col_indices_.size() == values_.size(), "CsrMatrix: col_indices/values length mismatch");
    for (std::size_t i = 0; i < rows_; ++i) {
      detail::require(row_offsets_[i] <= row_offsets_[i + 1], "CsrMatrix: row_offsets decreasing");
      detail::require(row_offsets_[i + 1] <= col_indices_.size(), "CsrMatrix: row_offsets out of bounds");
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        detail::require(col_indices_[k] < cols_, "CsrMatrix: column index out of range");
        if (k > row_offsets_[i])
          detail::require(col_indices_[k - 1] < col_indices_[k],
                          "CsrMatrix: column indices not strictly increasing within row");
      }
    }
    detail::require(all_finite(values_), "CsrMatrix: non-finite value");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_offsets_;
  std::vector<std::size_t> col_indices_;
  Vector values_;
};

namespace detail {
struct OperatorStorage;
}

class BlockDiagOperator;

/// Immutable, shareable handle to a constraint matrix. Copies share storage.
class LinearOperator {
 public:
  LinearOperator() : LinearOperator(DenseMatrix::zeros(0, 0)) {}
  LinearOperator(DenseMatrix d);  // NOLINT(google-explicit-constructor)
  LinearOperator(CsrMatrix c);    // NOLINT(google-explicit-constructor)
  LinearOperator(BlockDiagOperator b);  // NOLINT(google-explicit-constructor)

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  Realization realization() const noexcept;

  const DenseMatrix* as_dense() const noexcept;
  const CsrMatrix* as_csr() const noexcept;
  const BlockDiagOperator* as_block_diag() const noexcept;

  /// out = A v. Unchecked sizes; use matvec() for the checked form.
  void apply(std::span<const double> v, std::span<double> out) const;
  /// out = A^T w.
  void apply_transpose(std::span<const double> w, std::span<double> out) const;

  /// Visits every stored entry (all entries for dense) in row-major order of
  /// each realization; block-diagonal composites report global indices.
  template <class F>
  void for_each_entry(F&& f) const;

 private:
  std::shared_ptr<const detail::OperatorStorage> impl_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

/// Lazy block-diagonal composite; blocks are never densified.
class BlockDiagOperator {
 public:
  explicit BlockDiagOperator(std::vector<LinearOperator> blocks) : blocks_(std::move(blocks)) {
    detail::require(!blocks_.empty(), "block_diag: empty operator list");
    row_starts_.push_back(0);
    col_starts_.push_back(0);
    for (const auto& b : blocks_) {
      row_starts_.push_back(row_starts_.back() + b.rows());
      col_starts_.push_back(col_starts_.back() + b.cols());
    }
  }

  std::size_t rows() const noexcept { return row_starts_.back(); }
  std::size_t cols() const noexcept { return col_starts_.back(); }
  const std::vector<LinearOperator>& blocks() const noexcept { return blocks_; }
  const std::vector<std::size_t>& row_starts() const noexcept { return row_starts_; }
  const std::vector<std::size_t>& col_starts() const noexcept { return col_starts_; }

  void apply(std::span<const double> v, std::span<double> out) const {
    for (std::size_t k = 0; k < blocks_.size(); ++k)
      blocks_[k].apply(v.subspan(col_starts_[k], blocks_[k].cols()),
                       out.subspan(row_starts_[k], blocks_[k].rows()));
  }

  void apply_transpose(std::span<const double> w, std::span<double> out) const {
    for (std::size_t k = 0; k < blocks_.size(); ++k)
      blocks_[k].apply_transpose(w.subspan(row_starts_[k], blocks_[k].rows()),
                                 out.subspan(col_starts_[k], blocks_[k].cols()));
  }

  void for_each_entry(const std::function<void(std::size_t, std::size_t, double)>& f) const;

 private:
  std::vector<LinearOperator> blocks_;
  std::vector<std::size_t> row_starts_;
  std::vector<std::size_t> col_starts_;
};

namespace detail {
struct OperatorStorage {
  std::variant<DenseMatrix, CsrMatrix, BlockDiagOperator> data;
};
}  // namespace detail

inline LinearOperator::LinearOperator(DenseMatrix d)
    : impl_(std::make_shared<const detail::OperatorStorage>(detail::OperatorStorage{std::move(d)})) {
  rows_ = std::get<DenseMatrix>(impl_->data).rows();
  cols_ = std::get<DenseMatrix>(impl_->data).cols();
}

inline LinearOperator::LinearOperator(CsrMatrix c)
    : impl_(std::make_shared<const detail::OperatorStorage>(detail::OperatorStorage{std::move(c)})) {
  rows_ = std::get<CsrMatrix>(impl_->data).rows();
  cols_ = std::get<CsrMatrix>(impl_->data).cols();
}

inline LinearOperator::LinearOperator(BlockDiagOperator b)
    : impl_(std::make_shared<const detail::OperatorStorage>(detail::OperatorStorage{std::move(b)})) {
  rows_ = std::get<BlockDiagOperator>(impl_->data).rows();
  cols_ = std::get<BlockDiagOperator>(impl_->data).cols();
}

inline Realization LinearOperator::realization() const noexcept {
  return static_cast<Realization>(impl_->data.index());
}

inline const DenseMatrix* LinearOperator::as_dense() const noexcept {
  return std::get_if<DenseMatrix>(&impl_->data);
}
inline const CsrMatrix* LinearOperator::as_csr() const noexcept {
  return std::get_if<CsrMatrix>(&impl_->data);
}
inline const BlockDiagOperator* LinearOperator::as_block_diag() const noexcept {
  return std::get_if<BlockDiagOperator>(&impl_->data);
}

inline void LinearOperator::apply(std::span<const double> v, std::span<double> out) const {
  std::visit([&](const auto& m) { m.apply(v, out); }, impl_->data);
}

inline void LinearOperator::apply_transpose(std::span<const double> w, std::span<double> out) const {
  std::visit([&](const auto& m) { m.apply_transpose(w, out); }, impl_->data);
}

template <class F>
void LinearOperator::for_each_entry(F&& f) const {
  std::visit([&](const auto& m) { m.for_each_entry(f); }, impl_->data);
}

inline void BlockDiagOperator::for_each_entry(
    const std::function<void(std::size_t, std::size_t, double)>& f) const {
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const std::size_t r0 = row_starts_[k];
    const std::size_t c0 = col_starts_[k];
    blocks_[k].for_each_entry([&](std::size_t i, std::size_t j, double v) { f(r0 + i, c0 + j, v); });
  }
}

inline Vector matvec(const LinearOperator& op, std::span<const double> v) {
  detail::require(v.size() == op.cols(), "matvec: vector length != operator cols");
  Vector out(op.rows());
  op.apply(v, out);
  return out;
}

inline Vector rmatvec(const LinearOperator& op, std::span<const double> w) {
  detail::require(w.size() == op.rows(), "rmatvec: vector length != operator rows");
  Vector out(op.cols());
  op.apply_transpose(w, out);
  return out;
}

inline LinearOperator block_diag(std::vector<LinearOperator> ops) {
  return LinearOperator(BlockDiagOperator(std::move(ops)));
}

/// Explicit dense copy; intended for small instances and tests.
inline DenseMatrix densify(const LinearOperator& op) {
  DenseMatrix out = DenseMatrix::zeros(op.rows(), op.cols());
  Vector e = out.entries();
  const std::size_t n = op.cols();
  op.for_each_entry([&](std::size_t i, std::size_t j, double v) { e[i * n + j] += v; });
  return DenseMatrix(op.rows(), op.cols(), std::move(e));
}

/// CSR copy of the stored pattern (explicit zeros of a dense operator are dropped).
inline CsrMatrix to_csr(const LinearOperator& op) {
  if (const auto* c = op.as_csr()) return *c;
  std::vector<std::tuple<std::size_t, std::size_t, double>> t;
  op.for_each_entry([&](std::size_t i, std::size_t j, double v) {
    if (v != 0.0 || op.realization() != Realization::dense) t.emplace_back(i, j, v);
  });
  return CsrMatrix::from_triplets(op.rows(), op.cols(), std::move(t));
}

}  // namespace linproj
