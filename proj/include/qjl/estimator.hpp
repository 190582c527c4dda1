#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qjl/bitpack.hpp"
#include "qjl/sketch.hpp"

namespace qjl {

/// sqrt(pi / 2): the inverse of E|g| for g ~ N(0, 1).
inline constexpr double kSignEstimatorScale = 1.2533141373155002512078826;

/// One key after the 1-bit transform: sign(S k) packed, plus ||k||_2.
///
/// A key with m() == 0 is the empty sub-key of a degenerate outlier split;
/// every estimate against it is 0.
struct QuantizedKey {
  PackedSigns bits;
  double norm = 0.0;

  std::size_t m() const noexcept { return bits.size(); }
  bool operator==(const QuantizedKey&) const = default;
};

/// S q at full precision. The query side is never quantized.
struct SketchedQuery {
  std::vector<double> values;
  std::size_t source_dim = 0;
};

/// Bit i is set iff (S k)_i >= 0, so sign(0) = +1. norm = ||k||_2.
QuantizedKey quantize_key(const SketchMatrix& sketch, std::span<const double> key);

SketchedQuery sketch_query(const SketchMatrix& sketch, std::span<const double> query);

/// sqrt(pi/2) / m * norm * <S q, sign(S k)>.
///
/// The packed kernel walks set and clear bits separately and returns
/// (sum over +1 coordinates) - (sum over -1 coordinates), both accumulated in
/// double in index order. Flipping every sign therefore negates the result
/// exactly. A zero norm returns exactly 0.
double estimate_inner_product(const SketchedQuery& query, const QuantizedKey& key);

/// The raw kernel <values, signs> over packed bits; values.size() must equal bits.size().
double signed_sum(std::span<const double> values, const PackedSigns& bits);

}  // namespace qjl
