#include "qjl/sketch.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "qjl/error.hpp"
#include "qjl/rng.hpp"

namespace qjl {

SketchMatrix::SketchMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries,
                           std::uint64_t seed, bool orthogonalized)
    : rows_(rows), cols_(cols), entries_(std::move(entries)), seed_(seed), orthogonalized_(orthogonalized) {}

SketchMatrix SketchMatrix::from_entries(std::size_t rows, std::size_t cols, std::vector<double> entries,
                                        std::uint64_t seed, bool orthogonalized) {
  if (rows == 0 || cols == 0) throw InvalidArgument("sketch dimensions must be positive");
  if (entries.size() != rows * cols) {
    throw InvalidArgument("sketch payload has " + std::to_string(entries.size()) + " entries, expected " +
                          std::to_string(rows * cols));
  }
  return SketchMatrix(rows, cols, std::move(entries), seed, orthogonalized);
}

void SketchMatrix::apply(std::span<const double> x, std::span<double> out) const {
  if (x.size() != cols_) {
    throw InvalidArgument("sketch expects a " + std::to_string(cols_) + "-vector, got " +
                          std::to_string(x.size()));
  }
  if (out.size() != rows_) throw InvalidArgument("sketch output buffer has wrong length");
  for (std::size_t i = 0; i < rows_; ++i) {
    const double* r = entries_.data() + i * cols_;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) acc += r[j] * x[j];
    out[i] = acc;
  }
}

std::vector<double> SketchMatrix::apply(std::span<const double> x) const {
  std::vector<double> out(rows_);
  apply(x, out);
  return out;
}

SketchMatrix generate_gaussian(std::size_t m, std::size_t d, std::uint64_t seed) {
  if (m == 0 || d == 0) {
    throw InvalidArgument("generate_gaussian: invalid dimension " + std::to_string(m) + "x" +
                          std::to_string(d));
  }
  Rng rng(seed);
  std::vector<double> entries(m * d);
  for (auto& e : entries) e = rng.normal();
  return SketchMatrix::from_entries(m, d, std::move(entries), seed, false);
}

SketchMatrix orthogonalize(const SketchMatrix& gaussian) {
  const std::size_t m = gaussian.rows();
  const std::size_t d = gaussian.cols();
  const std::size_t block = std::min(m, d);
  const double row_norm = std::sqrt(static_cast<double>(d));

  std::vector<double> out(m * d);
  for (std::size_t start = 0; start < m; start += block) {
    const std::size_t count = std::min(block, m - start);
    // Columns of A are the block's rows; A = QR gives orthonormal columns of Q.
    Eigen::MatrixXd a(d, count);
    for (std::size_t r = 0; r < count; ++r) {
      const auto src = gaussian.row(start + r);
      for (std::size_t c = 0; c < d; ++c) a(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = src[c];
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
    const auto diag = qr.matrixQR().diagonal();
    for (std::size_t r = 0; r < count; ++r) {
      const auto col = static_cast<Eigen::Index>(r);
      const double sign = diag(col) < 0.0 ? -1.0 : 1.0;
      double* dst = out.data() + (start + r) * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] = sign * row_norm * q(static_cast<Eigen::Index>(c), col);
    }
  }
  return SketchMatrix::from_entries(m, d, std::move(out), gaussian.seed(), true);
}

SketchMatrix generate_sketch(std::size_t m, std::size_t d, std::uint64_t seed, bool orthogonal) {
  auto s = generate_gaussian(m, d, seed);
  return orthogonal ? orthogonalize(s) : s;
}

}  // namespace qjl
