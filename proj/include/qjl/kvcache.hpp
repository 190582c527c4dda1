#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <vector>

#include "qjl/estimator.hpp"
#include "qjl/matrix.hpp"
#include "qjl/sketch.hpp"
#include "qjl/softmax.hpp"

namespace qjl {

// Key cache with outlier-channel splitting
// ----------------------------------------
// A handful of fixed key channels carry much larger magnitudes than the rest.
// They are picked once from the prompt (top-h mean |k_c|) and frozen. Every
// key is split into its inlier and outlier sub-vectors, and each part is
// quantized by its own independent sketch:
//
//   inlier  sketch: m_in  x (d - h), seed derive_seed(master, 0)
//   outlier sketch: m_out x  h,      seed derive_seed(master, 1)
//
// The logit for token j is the sum of the two sub-estimates. Queries are split
// by the same profile. With h = 0 the cache is the plain single-sketch
// quantizer on the whole vector.

inline constexpr std::uint64_t kInlierSketchStream = 0;
inline constexpr std::uint64_t kOutlierSketchStream = 1;
inline constexpr std::size_t kDefaultOutlierCount = 4;
inline constexpr std::size_t kDefaultOutlierBitsPerChannel = 8;

struct OutlierProfile {
  std::size_t dim = 0;
  /// Sorted ascending.
  std::vector<std::size_t> outlier_channels;
  /// Mean |value| per channel over the prompt; empty for hand-built profiles.
  std::vector<double> channel_magnitude;

  std::size_t count() const noexcept { return outlier_channels.size(); }
  std::vector<std::size_t> inlier_channels() const;

  static OutlierProfile none(std::size_t dim);
  /// Validates and sorts an explicit channel set.
  static OutlierProfile from_channels(std::size_t dim, std::vector<std::size_t> channels);

  bool operator==(const OutlierProfile&) const = default;
};

/// Top-h channels by mean absolute value over the prompt rows, ties to the lower index.
OutlierProfile detect_outliers(const Matrix& prompt_keys, std::size_t count);

struct KeyCacheConfig {
  std::size_t dim = 0;
  std::size_t outliers = 0;
  std::size_t inlier_sketch_dim = 0;
  std::size_t outlier_sketch_dim = 0;
  std::uint64_t seed = 0;
  bool orthogonalize = false;

  bool operator==(const KeyCacheConfig&) const = default;
};

/// One cached token: the quantized inlier and outlier parts of the same key.
struct KeyEntry {
  QuantizedKey inlier;
  QuantizedKey outlier;

  bool operator==(const KeyEntry&) const = default;
};

struct SplitVector {
  std::vector<double> inlier;
  std::vector<double> outlier;
};

/// Append-only quantized key stream.
///
/// One writer may append while any number of readers score; a reader sees a
/// consistent prefix of the stream. Entries are never modified once appended.
class KeyCacheState {
 public:
  /// Builds both sketches from config.seed. A sub-sketch whose dimension or
  /// sketch size is zero is omitted and its sub-keys are empty. Throws when
  /// the outlier part would get fewer bits per channel than the inliers.
  KeyCacheState(KeyCacheConfig config, OutlierProfile profile);

  KeyCacheState(KeyCacheState&& other) noexcept;
  KeyCacheState& operator=(KeyCacheState&& other) noexcept;
  KeyCacheState(const KeyCacheState&) = delete;
  KeyCacheState& operator=(const KeyCacheState&) = delete;
  ~KeyCacheState();

  /// Effective config: sketch dims of omitted parts read as 0.
  const KeyCacheConfig& config() const noexcept { return config_; }
  const OutlierProfile& profile() const noexcept { return profile_; }
  std::size_t dim() const noexcept { return config_.dim; }
  const SketchMatrix* inlier_sketch() const noexcept { return inlier_sketch_ ? &*inlier_sketch_ : nullptr; }
  const SketchMatrix* outlier_sketch() const noexcept { return outlier_sketch_ ? &*outlier_sketch_ : nullptr; }

  std::size_t size() const;
  bool empty() const { return size() == 0; }
  KeyEntry entry(std::size_t index) const;

  SplitVector split(std::span<const double> vec) const;

  void append(std::span<const double> key);
  /// Appends an already-quantized entry (cache loading); sizes must match the sketches.
  void append_quantized(KeyEntry entry);

  /// Estimated <q, k_j> for every cached token, in append order. Tokens may
  /// be split across `threads` workers; each logit is computed the same way
  /// regardless of the split.
  std::vector<double> estimate_logits(std::span<const double> query, unsigned threads = 1) const;
  ScoreVector estimate_scores(std::span<const double> query, double temperature = 1.0, unsigned threads = 1) const;

 private:
  KeyCacheConfig config_;
  OutlierProfile profile_;
  std::vector<std::size_t> inlier_channels_;
  std::optional<SketchMatrix> inlier_sketch_;
  std::optional<SketchMatrix> outlier_sketch_;
  std::vector<KeyEntry> entries_;
  std::unique_ptr<std::shared_mutex> mutex_;
};

/// Storage cost in bits per floating-point number (FPN).
struct MemoryReport {
  std::size_t dim = 0;
  std::size_t tokens = 0;
  std::size_t key_bits_per_token = 0;
  std::size_t value_bits_per_token = 0;
  double key_bits_per_fpn = 0.0;
  double value_bits_per_fpn = 0.0;
  /// Key and value caches hold the same number of FPNs, so this is their mean.
  double bits_per_fpn = 0.0;
  double baseline_bits_per_fpn = 16.0;
  double reduction = 0.0;
  double compressed_bytes = 0.0;
  double baseline_bytes = 0.0;
};

/// key bits/FPN   = (m_in + m_out + 2 * norm_bits) / d
/// value bits/FPN = value_bits + zero_scale_bits / d
MemoryReport memory_report(const KeyCacheState& state, unsigned value_bits, unsigned norm_bits = 16,
                           unsigned zero_scale_bits = 32, unsigned baseline_bits = 16);

}  // namespace qjl
