#include "qjl/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "parallel.hpp"
#include "qjl/error.hpp"

namespace qjl {

namespace {

std::vector<double> weighted_sum(const ScoreVector& scores, const Matrix& values) {
  std::vector<double> out(values.cols(), 0.0);
  for (std::size_t i = 0; i < values.rows(); ++i) {
    const auto v = values.row(i);
    const double w = scores[i];
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w * v[c];
  }
  return out;
}

}  // namespace

DecodeResult exact_decode(std::span<const double> query, const Matrix& keys, const Matrix& values,
                          double temperature, unsigned threads) {
  if (keys.rows() == 0) throw InvalidArgument("exact_decode: no cached tokens");
  if (keys.rows() != values.rows()) {
    throw InvalidArgument("exact_decode: " + std::to_string(keys.rows()) + " keys vs " +
                          std::to_string(values.rows()) + " values");
  }
  if (keys.cols() != query.size()) {
    throw InvalidArgument("exact_decode: query has dimension " + std::to_string(query.size()) + ", keys have " +
                          std::to_string(keys.cols()));
  }
  std::vector<double> logits(keys.rows());
  detail::parallel_for(keys.rows(), threads, [&](std::size_t i) {
    const auto k = keys.row(i);
    double acc = 0.0;
    for (std::size_t c = 0; c < k.size(); ++c) acc += query[c] * k[c];
    logits[i] = acc;
  });
  DecodeResult r;
  r.scores = softmax(logits, temperature);
  r.output = weighted_sum(r.scores, values);
  return r;
}

DecodeResult quantized_decode(std::span<const double> query, const KeyCacheState& keys,
                              std::span<const QuantizedValueToken> values, double temperature,
                              unsigned threads) {
  DecodeResult r;
  const auto logits = keys.estimate_logits(query, threads);
  if (logits.empty()) throw InvalidState("quantized_decode: key cache is empty");
  if (logits.size() != values.size()) {
    throw InvalidState("quantized_decode: cache holds " + std::to_string(logits.size()) + " keys but " +
                       std::to_string(values.size()) + " value tokens");
  }
  r.scores = softmax(logits, temperature);
  r.output.assign(keys.dim(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& t = values[i];
    if (t.codes.size() != r.output.size()) {
      throw InvalidState("quantized_decode: value token " + std::to_string(i) + " has wrong dimension");
    }
    const double w = r.scores[i];
    for (std::size_t c = 0; c < r.output.size(); ++c) {
      r.output[c] += w * (t.zero + static_cast<double>(t.codes[c]) * t.scale);
    }
  }
  return r;
}

ErrorMetrics error_metrics(const DecodeResult& exact, const DecodeResult& approx) {
  if (exact.scores.size() != approx.scores.size() || exact.output.size() != approx.output.size()) {
    throw InvalidArgument("error_metrics: results have different shapes");
  }
  ErrorMetrics m;
  double tv = 0.0;
  for (std::size_t i = 0; i < exact.scores.size(); ++i) {
    const double diff = std::abs(approx.scores[i] - exact.scores[i]);
    tv += diff;
    double rel = 0.0;
    if (diff > 0.0) rel = exact.scores[i] > 0.0 ? diff / exact.scores[i] : std::numeric_limits<double>::infinity();
    m.max_rel_score_error = std::max(m.max_rel_score_error, rel);
  }
  m.tv_distance = 0.5 * tv;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t c = 0; c < exact.output.size(); ++c) {
    const double diff = approx.output[c] - exact.output[c];
    num += diff * diff;
    den += exact.output[c] * exact.output[c];
  }
  if (num > 0.0) m.rel_l2_error = den > 0.0 ? std::sqrt(num / den) : std::numeric_limits<double>::infinity();
  return m;
}

}  // namespace qjl
