#include "qjl/value_quant.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <string>

#include "qjl/error.hpp"

namespace qjl {

QuantizedValueToken quantize_value(std::span<const double> value, unsigned bits) {
  if (bits < 1 || bits > 8) throw InvalidArgument("quantize_value: bit width " + std::to_string(bits) + " not in [1, 8]");
  QuantizedValueToken out;
  out.bits = bits;
  out.codes.assign(value.size(), 0);
  if (value.empty()) return out;

  const auto [lo, hi] = std::minmax_element(value.begin(), value.end());
  out.zero = *lo;
  if (*hi == *lo) return out;

  const double levels = static_cast<double>((1U << bits) - 1);
  out.scale = (*hi - *lo) / levels;
  // nearbyint honours the current rounding mode; FE_TONEAREST is ties-to-even.
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double code = std::nearbyint((value[i] - out.zero) / out.scale);
    out.codes[i] = static_cast<std::uint8_t>(std::clamp(code, 0.0, levels));
  }
  std::fesetround(saved);
  return out;
}

std::vector<double> dequantize_value(const QuantizedValueToken& token) {
  std::vector<double> out(token.codes.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = token.zero + static_cast<double>(token.codes[i]) * token.scale;
  return out;
}

}  // namespace qjl
