#include "qjl/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "qjl/attention.hpp"
#include "qjl/error.hpp"
#include "qjl/harness.hpp"
#include "qjl/kvcache.hpp"
#include "qjl/value_quant.hpp"

namespace qjl {

namespace {

volatile double g_sink = 0.0;

double median(std::vector<double> samples) {
  std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2), samples.end());
  return samples[samples.size() / 2];
}

void evict(std::vector<std::uint64_t>& scratch) {
  std::uint64_t acc = 0;
  for (auto& w : scratch) acc += ++w;
  g_sink = static_cast<double>(acc);
}

template <typename Step>
double median_step_us(const BenchOptions& opts, Step&& step) {
  using Clock = std::chrono::steady_clock;
  std::vector<double> samples;
  samples.reserve(opts.repeats);
  step();  // warm-up
  if (opts.evict_bytes > 0) {
    std::vector<std::uint64_t> scratch(opts.evict_bytes / sizeof(std::uint64_t) + 1);
    for (std::size_t r = 0; r < opts.repeats; ++r) {
      evict(scratch);
      const auto start = Clock::now();
      step();
      samples.push_back(std::chrono::duration<double, std::micro>(Clock::now() - start).count());
    }
    return median(std::move(samples));
  }
  for (std::size_t r = 0; r < opts.repeats; ++r) {
    std::size_t iterations = 0;
    const auto start = Clock::now();
    double elapsed = 0.0;
    do {
      step();
      ++iterations;
      elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    } while (elapsed < opts.min_sample_seconds);
    samples.push_back(elapsed * 1e6 / static_cast<double>(iterations));
  }
  return median(std::move(samples));
}

}  // namespace

std::vector<BenchRow> run_decode_benchmark(const BenchOptions& opts) {
  if (opts.lengths.empty()) throw InvalidArgument("bench: no sequence lengths");
  if (opts.repeats == 0) throw InvalidArgument("bench: repeats must be positive");
  std::vector<BenchRow> rows;
  for (std::size_t n : opts.lengths) {
    const auto stream = generate_synthetic_stream(opts.dim, n, Distribution::Gaussian, opts.seed);
    const auto query = stream.queries.row(0);

    const std::size_t prompt = std::min<std::size_t>(n, 64);
    Matrix prompt_keys(prompt, opts.dim);
    for (std::size_t i = 0; i < prompt; ++i) std::copy_n(stream.keys.row(i).begin(), opts.dim, prompt_keys.row(i).begin());
    KeyCacheConfig kc{opts.dim, opts.outliers, opts.m_in, opts.m_out, opts.seed, false};
    KeyCacheState cache(kc, detect_outliers(prompt_keys, opts.outliers));
    std::vector<QuantizedValueToken> values;
    values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      cache.append(stream.keys.row(i));
      values.push_back(quantize_value(stream.values.row(i), opts.bits));
    }

    const double exact_us = median_step_us(opts, [&] {
      g_sink = exact_decode(query, stream.keys, stream.values, 1.0, opts.threads).output[0];
    });
    const double quant_us = median_step_us(opts, [&] {
      g_sink = quantized_decode(query, cache, values, 1.0, opts.threads).output[0];
    });
    rows.push_back({"exact", n, opts.dim, opts.threads, opts.repeats, exact_us});
    rows.push_back({"quantized", n, opts.dim, opts.threads, opts.repeats, quant_us});
  }
  return rows;
}

double loglog_slope(const std::vector<BenchRow>& rows, std::string_view path) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t k = 0;
  for (const auto& r : rows) {
    if (r.path != path) continue;
    const double x = std::log(static_cast<double>(r.n));
    const double y = std::log(r.median_us);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++k;
  }
  if (k < 2) throw InvalidArgument("loglog_slope: need at least two lengths for path " + std::string(path));
  const double kk = static_cast<double>(k);
  const double denom = kk * sxx - sx * sx;
  if (denom == 0.0) throw InvalidArgument("loglog_slope: lengths must differ");
  return (kk * sxy - sx * sy) / denom;
}

}  // namespace qjl
