#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace qjl {

/// Token-wise asymmetric integer quantization of one value vector.
///
/// Dequantized coordinate i is zero + codes[i] * scale. A constant token has
/// scale 0 and all codes 0.
struct QuantizedValueToken {
  std::vector<std::uint8_t> codes;
  double zero = 0.0;
  double scale = 0.0;
  unsigned bits = 0;

  bool operator==(const QuantizedValueToken&) const = default;
};

/// zero = min(v), scale = (max(v) - min(v)) / (2^bits - 1),
/// code = round-half-to-even((v - zero) / scale). bits must lie in [1, 8].
QuantizedValueToken quantize_value(std::span<const double> value, unsigned bits);

std::vector<double> dequantize_value(const QuantizedValueToken& token);

}  // namespace qjl
