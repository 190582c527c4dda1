#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace qjl {

/// Every tunable of the CLI, stored as a JSON object. Missing fields keep
/// their defaults; unknown fields are rejected. Serialization is canonical
/// (fixed key order, two-space indent), so write -> read -> write is
/// byte-identical.
struct RunConfig {
  // key/value cache
  std::size_t d = 128;
  std::size_t n = 1024;
  std::size_t m_in = 336;
  /// 0 selects 8 bits per outlier channel.
  std::size_t m_out = 0;
  std::size_t outliers = 4;
  unsigned bits = 3;
  std::uint64_t seed = 42;
  double temperature = 1.0;
  bool orthogonalize = false;
  /// Prompt tokens used for outlier-channel detection.
  std::size_t prompt = 64;
  unsigned norm_bits = 16;
  unsigned zero_scale_bits = 32;

  // synthetic data
  std::string dist = "sphere";
  double factor = 10.0;

  // validation suites
  double epsilon = 0.25;
  double delta = 0.01;
  std::size_t trial_dim = 64;
  /// Sketch dimension for the tail and score suites; 0 derives it from epsilon/delta.
  std::size_t trial_m = 0;
  std::size_t unbiasedness_m = 8;
  std::size_t unbiasedness_trials = 100000;
  std::size_t distortion_trials = 10000;
  std::size_t score_tokens = 256;
  std::size_t score_draws = 100;
  std::size_t orthogonal_m = 32;
  std::size_t orthogonal_trials = 10000;

  // benchmark
  std::vector<std::size_t> bench_lengths{1024, 4096, 16384, 65536};
  std::size_t bench_repeats = 5;

  unsigned threads = 1;

  std::size_t effective_m_out() const noexcept { return m_out != 0 ? m_out : 8 * outliers; }
  /// Range checks; throws InvalidArgument naming the offending field.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

std::string to_json_text(const RunConfig& cfg);
/// Throws InvalidArgument on malformed JSON, a wrong type, or an unknown field (named in the message).
RunConfig parse_run_config(std::string_view text);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& cfg);

}  // namespace qjl
