#include "qjl/softmax.hpp"

#include <algorithm>
#include <cmath>

#include "qjl/error.hpp"

namespace qjl {

ScoreVector softmax(std::span<const double> logits, double temperature) {
  if (logits.empty()) throw InvalidArgument("softmax: no logits");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidArgument("softmax: temperature must be finite and positive");
  }
  ScoreVector out;
  out.weights.resize(logits.size());
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.weights[i] = std::exp((logits[i] - top) / temperature);
    total += out.weights[i];
  }
  for (auto& w : out.weights) w /= total;
  return out;
}

}  // namespace qjl
