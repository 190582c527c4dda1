#include "qjl/estimator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "qjl/error.hpp"

namespace qjl {

QuantizedKey quantize_key(const SketchMatrix& sketch, std::span<const double> key) {
  if (key.size() != sketch.cols()) {
    throw InvalidArgument("quantize_key: key has dimension " + std::to_string(key.size()) +
                          ", sketch expects " + std::to_string(sketch.cols()));
  }
  const auto projected = sketch.apply(key);
  QuantizedKey out{PackedSigns(sketch.rows()), 0.0};
  for (std::size_t i = 0; i < projected.size(); ++i) {
    if (projected[i] >= 0.0) out.bits.set(i);
  }
  double sq = 0.0;
  for (double v : key) sq += v * v;
  out.norm = std::sqrt(sq);
  return out;
}

SketchedQuery sketch_query(const SketchMatrix& sketch, std::span<const double> query) {
  if (query.size() != sketch.cols()) {
    throw InvalidArgument("sketch_query: query has dimension " + std::to_string(query.size()) +
                          ", sketch expects " + std::to_string(sketch.cols()));
  }
  return SketchedQuery{sketch.apply(query), query.size()};
}

double signed_sum(std::span<const double> values, const PackedSigns& bits) {
  if (values.size() != bits.size()) {
    throw InvalidArgument("signed_sum: " + std::to_string(values.size()) + " values vs " +
                          std::to_string(bits.size()) + " sign bits");
  }
  const auto words = bits.words();
  const std::size_t m = bits.size();
  double positive = 0.0;
  double negative = 0.0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const std::size_t base = w * 64;
    const std::size_t used = std::min<std::size_t>(64, m - base);
    const std::uint64_t valid = used == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << used) - 1;
    const double* v = values.data() + base;
    for (std::uint64_t set = words[w] & valid; set != 0; set &= set - 1) {
      positive += v[std::countr_zero(set)];
    }
    for (std::uint64_t clear = ~words[w] & valid; clear != 0; clear &= clear - 1) {
      negative += v[std::countr_zero(clear)];
    }
  }
  return positive - negative;
}

double estimate_inner_product(const SketchedQuery& query, const QuantizedKey& key) {
  if (query.values.size() != key.m()) {
    throw InvalidArgument("estimate_inner_product: sketched query has " + std::to_string(query.values.size()) +
                          " coordinates, key has " + std::to_string(key.m()) + " bits");
  }
  if (key.m() == 0 || key.norm == 0.0) return 0.0;
  const double acc = signed_sum(query.values, key.bits);
  return kSignEstimatorScale / static_cast<double>(key.m()) * key.norm * acc;
}

}  // namespace qjl
