#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qjl/matrix.hpp"

namespace qjl {

/// Dense m x d random projection. Immutable once built, so it can be shared
/// across threads freely.
class SketchMatrix {
 public:
  /// Wraps explicit entries (row-major). Used for forced test matrices and
  /// matrices loaded from disk.
  static SketchMatrix from_entries(std::size_t rows, std::size_t cols, std::vector<double> entries,
                                   std::uint64_t seed = 0, bool orthogonalized = false);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool orthogonalized() const noexcept { return orthogonalized_; }

  std::span<const double> entries() const noexcept { return entries_; }
  std::span<const double> row(std::size_t i) const { return {entries_.data() + i * cols_, cols_}; }

  /// out = S x. Accumulates each output coordinate left to right in double.
  void apply(std::span<const double> x, std::span<double> out) const;
  std::vector<double> apply(std::span<const double> x) const;

  Matrix to_matrix() const { return Matrix(rows_, cols_, entries_); }

  bool operator==(const SketchMatrix&) const = default;

 private:
  SketchMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries, std::uint64_t seed,
               bool orthogonalized);

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
  std::uint64_t seed_ = 0;
  bool orthogonalized_ = false;
};

/// i.i.d. N(0, 1) entries drawn row-major from Rng(seed).
SketchMatrix generate_gaussian(std::size_t m, std::size_t d, std::uint64_t seed);

/// Orthogonalizes the rows of a Gaussian sketch with Householder QR.
///
/// Rows are processed in consecutive blocks of min(m, d) rows; rows inside a
/// block are mutually orthogonal, rows from different blocks are independent.
/// The QR factor is sign-corrected (diag(R) > 0) so a single row keeps its
/// direction, and every row is rescaled to norm sqrt(d) so that <s, x> keeps
/// unit variance for unit x and the estimator constant is unchanged.
SketchMatrix orthogonalize(const SketchMatrix& gaussian);

/// generate_gaussian followed by orthogonalize when requested.
SketchMatrix generate_sketch(std::size_t m, std::size_t d, std::uint64_t seed, bool orthogonal);

}  // namespace qjl
