#pragma once

#include <span>
#include <vector>

namespace qjl {

/// Softmax-normalized attention weights over the cached tokens.
struct ScoreVector {
  std::vector<double> weights;

  std::size_t size() const noexcept { return weights.size(); }
  double operator[](std::size_t i) const { return weights[i]; }
};

/// softmax(logits / temperature) with max subtraction. Throws on an empty
/// input or a temperature that is not finite and positive.
ScoreVector softmax(std::span<const double> logits, double temperature = 1.0);

}  // namespace qjl
