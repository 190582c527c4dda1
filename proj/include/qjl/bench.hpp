#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace qjl {

struct BenchOptions {
  std::vector<std::size_t> lengths{1024, 4096, 16384, 65536};
  std::size_t dim = 128;
  std::size_t m_in = 336;
  std::size_t m_out = 32;
  std::size_t outliers = 4;
  unsigned bits = 3;
  std::uint64_t seed = 42;
  std::size_t repeats = 5;
  unsigned threads = 1;
  /// Each timing sample repeats the decode step until at least this much time has passed.
  double min_sample_seconds = 0.005;
  /// When non-zero, every sample is a single decode step preceded by a sweep over
  /// this many bytes of scratch memory, so the KV data starts outside the caches.
  std::size_t evict_bytes = 0;
};

/// Median wall-clock time of one decode step (one query against n cached tokens).
struct BenchRow {
  std::string path;  // "exact" or "quantized"
  std::size_t n = 0;
  std::size_t dim = 0;
  unsigned threads = 1;
  std::size_t repeats = 0;
  double median_us = 0.0;
};

std::vector<BenchRow> run_decode_benchmark(const BenchOptions& opts);

/// Least-squares slope of log(median_us) against log(n) over the rows of one path.
double loglog_slope(const std::vector<BenchRow>& rows, std::string_view path);

}  // namespace qjl
