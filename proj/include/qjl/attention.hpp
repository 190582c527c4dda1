#pragma once

#include <span>
#include <vector>

#include "qjl/kvcache.hpp"
#include "qjl/matrix.hpp"
#include "qjl/softmax.hpp"
#include "qjl/value_quant.hpp"

namespace qjl {

/// Attention output o = sum_i scores[i] * v_i together with the scores.
struct DecodeResult {
  std::vector<double> output;
  ScoreVector scores;
};

/// Full-precision single-query attention over n cached keys/values.
/// Logits are <q, k_i> / temperature. The logit pass may be split over
/// `threads` workers; every logit is still one left-to-right dot product, so
/// the result does not depend on the split.
DecodeResult exact_decode(std::span<const double> query, const Matrix& keys, const Matrix& values,
                          double temperature = 1.0, unsigned threads = 1);

/// Scores from the quantized key cache, output from dequantized values.
DecodeResult quantized_decode(std::span<const double> query, const KeyCacheState& keys,
                              std::span<const QuantizedValueToken> values, double temperature = 1.0,
                              unsigned threads = 1);

struct ErrorMetrics {
  /// max_i |approx(i) - exact(i)| / exact(i)
  double max_rel_score_error = 0.0;
  /// (1/2) sum_i |approx(i) - exact(i)|
  double tv_distance = 0.0;
  /// ||o_approx - o_exact||_2 / ||o_exact||_2
  double rel_l2_error = 0.0;
};

ErrorMetrics error_metrics(const DecodeResult& exact, const DecodeResult& approx);

}  // namespace qjl
