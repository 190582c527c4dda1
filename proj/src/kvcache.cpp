#include "qjl/kvcache.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <string>

#include "parallel.hpp"
#include "qjl/error.hpp"
#include "qjl/rng.hpp"

namespace qjl {

std::vector<std::size_t> OutlierProfile::inlier_channels() const {
  std::vector<std::size_t> out;
  out.reserve(dim - outlier_channels.size());
  std::size_t next = 0;
  for (std::size_t c = 0; c < dim; ++c) {
    if (next < outlier_channels.size() && outlier_channels[next] == c) {
      ++next;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

OutlierProfile OutlierProfile::none(std::size_t dim) { return OutlierProfile{dim, {}, {}}; }

OutlierProfile OutlierProfile::from_channels(std::size_t dim, std::vector<std::size_t> channels) {
  std::sort(channels.begin(), channels.end());
  if (std::adjacent_find(channels.begin(), channels.end()) != channels.end()) {
    throw InvalidArgument("outlier profile: duplicate channel");
  }
  if (!channels.empty() && channels.back() >= dim) {
    throw InvalidArgument("outlier profile: channel " + std::to_string(channels.back()) + " out of range for d=" +
                          std::to_string(dim));
  }
  return OutlierProfile{dim, std::move(channels), {}};
}

OutlierProfile detect_outliers(const Matrix& prompt_keys, std::size_t count) {
  if (prompt_keys.rows() == 0) throw InvalidArgument("detect_outliers: empty prompt");
  const std::size_t d = prompt_keys.cols();
  if (count > d) {
    throw InvalidArgument("detect_outliers: h=" + std::to_string(count) + " exceeds d=" + std::to_string(d));
  }
  std::vector<double> magnitude(d, 0.0);
  for (std::size_t r = 0; r < prompt_keys.rows(); ++r) {
    const auto row = prompt_keys.row(r);
    for (std::size_t c = 0; c < d; ++c) magnitude[c] += std::abs(row[c]);
  }
  for (auto& m : magnitude) m /= static_cast<double>(prompt_keys.rows());

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return magnitude[a] > magnitude[b]; });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return OutlierProfile{d, std::move(order), std::move(magnitude)};
}

KeyCacheState::KeyCacheState(KeyCacheConfig config, OutlierProfile profile)
    : config_(config), profile_(std::move(profile)), mutex_(std::make_unique<std::shared_mutex>()) {
  if (config_.dim == 0) throw InvalidArgument("key cache: d must be positive");
  if (profile_.dim != config_.dim) {
    throw InvalidArgument("key cache: profile built for d=" + std::to_string(profile_.dim) + ", config has d=" +
                          std::to_string(config_.dim));
  }
  if (profile_.count() != config_.outliers) {
    throw InvalidArgument("key cache: profile has " + std::to_string(profile_.count()) +
                          " outlier channels, config asks for " + std::to_string(config_.outliers));
  }
  const std::size_t h = config_.outliers;
  const std::size_t inlier_dim = config_.dim - h;
  if (h == 0) config_.outlier_sketch_dim = 0;
  if (inlier_dim == 0) config_.inlier_sketch_dim = 0;
  if (inlier_dim > 0 && config_.inlier_sketch_dim == 0) {
    throw InvalidArgument("key cache: inlier sketch dimension m_in must be positive");
  }
  if (h > 0 && config_.outlier_sketch_dim == 0) {
    throw InvalidArgument("key cache: outlier sketch dimension m_out must be positive when h > 0");
  }
  // m_out / h >= m_in / (d - h)
  if (h > 0 && inlier_dim > 0 && config_.outlier_sketch_dim * inlier_dim < config_.inlier_sketch_dim * h) {
    throw InvalidArgument("key cache: outlier channels need at least the inlier bit rate (m_out/h >= m_in/(d-h))");
  }

  inlier_channels_ = profile_.inlier_channels();
  if (inlier_dim > 0) {
    inlier_sketch_ = generate_sketch(config_.inlier_sketch_dim, inlier_dim,
                                     derive_seed(config_.seed, kInlierSketchStream), config_.orthogonalize);
  }
  if (h > 0) {
    outlier_sketch_ = generate_sketch(config_.outlier_sketch_dim, h, derive_seed(config_.seed, kOutlierSketchStream),
                                      config_.orthogonalize);
  }
}

KeyCacheState::KeyCacheState(KeyCacheState&& other) noexcept
    : config_(other.config_),
      profile_(std::move(other.profile_)),
      inlier_channels_(std::move(other.inlier_channels_)),
      inlier_sketch_(std::move(other.inlier_sketch_)),
      outlier_sketch_(std::move(other.outlier_sketch_)),
      entries_(std::move(other.entries_)),
      mutex_(std::make_unique<std::shared_mutex>()) {}

KeyCacheState& KeyCacheState::operator=(KeyCacheState&& other) noexcept {
  if (this != &other) {
    config_ = other.config_;
    profile_ = std::move(other.profile_);
    inlier_channels_ = std::move(other.inlier_channels_);
    inlier_sketch_ = std::move(other.inlier_sketch_);
    outlier_sketch_ = std::move(other.outlier_sketch_);
    entries_ = std::move(other.entries_);
  }
  return *this;
}

KeyCacheState::~KeyCacheState() = default;

std::size_t KeyCacheState::size() const {
  std::shared_lock lock(*mutex_);
  return entries_.size();
}

KeyEntry KeyCacheState::entry(std::size_t index) const {
  std::shared_lock lock(*mutex_);
  if (index >= entries_.size()) {
    throw InvalidArgument("key cache: entry " + std::to_string(index) + " out of range (n=" +
                          std::to_string(entries_.size()) + ")");
  }
  return entries_[index];
}

SplitVector KeyCacheState::split(std::span<const double> vec) const {
  if (vec.size() != config_.dim) {
    throw InvalidArgument("key cache: vector has dimension " + std::to_string(vec.size()) + ", expected " +
                          std::to_string(config_.dim));
  }
  SplitVector out;
  out.inlier.reserve(inlier_channels_.size());
  for (auto c : inlier_channels_) out.inlier.push_back(vec[c]);
  out.outlier.reserve(profile_.count());
  for (auto c : profile_.outlier_channels) out.outlier.push_back(vec[c]);
  return out;
}

void KeyCacheState::append(std::span<const double> key) {
  const auto parts = split(key);
  KeyEntry e;
  if (inlier_sketch_) e.inlier = quantize_key(*inlier_sketch_, parts.inlier);
  if (outlier_sketch_) e.outlier = quantize_key(*outlier_sketch_, parts.outlier);
  std::unique_lock lock(*mutex_);
  entries_.push_back(std::move(e));
}

void KeyCacheState::append_quantized(KeyEntry entry) {
  if (entry.inlier.m() != config_.inlier_sketch_dim || entry.outlier.m() != config_.outlier_sketch_dim) {
    throw InvalidArgument("key cache: entry bit counts (" + std::to_string(entry.inlier.m()) + ", " +
                          std::to_string(entry.outlier.m()) + ") do not match sketches (" +
                          std::to_string(config_.inlier_sketch_dim) + ", " +
                          std::to_string(config_.outlier_sketch_dim) + ")");
  }
  if (!(entry.inlier.norm >= 0.0) || !(entry.outlier.norm >= 0.0)) {
    throw InvalidArgument("key cache: key norms must be non-negative");
  }
  std::unique_lock lock(*mutex_);
  entries_.push_back(std::move(entry));
}

std::vector<double> KeyCacheState::estimate_logits(std::span<const double> query, unsigned threads) const {
  const auto parts = split(query);
  SketchedQuery q_in;
  SketchedQuery q_out;
  if (inlier_sketch_) q_in = sketch_query(*inlier_sketch_, parts.inlier);
  if (outlier_sketch_) q_out = sketch_query(*outlier_sketch_, parts.outlier);

  std::shared_lock lock(*mutex_);
  std::vector<double> logits(entries_.size());
  detail::parallel_for(entries_.size(), threads, [&](std::size_t j) {
    logits[j] = estimate_inner_product(q_in, entries_[j].inlier) + estimate_inner_product(q_out, entries_[j].outlier);
  });
  return logits;
}

ScoreVector KeyCacheState::estimate_scores(std::span<const double> query, double temperature,
                                           unsigned threads) const {
  const auto logits = estimate_logits(query, threads);
  if (logits.empty()) throw InvalidState("estimate_scores: key cache is empty");
  return softmax(logits, temperature);
}

MemoryReport memory_report(const KeyCacheState& state, unsigned value_bits, unsigned norm_bits,
                           unsigned zero_scale_bits, unsigned baseline_bits) {
  if (state.empty()) throw InvalidState("memory_report: key cache is empty");
  const auto& cfg = state.config();
  MemoryReport r;
  r.dim = cfg.dim;
  r.tokens = state.size();
  r.key_bits_per_token = cfg.inlier_sketch_dim + cfg.outlier_sketch_dim + 2 * std::size_t{norm_bits};
  r.value_bits_per_token = std::size_t{value_bits} * cfg.dim + zero_scale_bits;
  const double d = static_cast<double>(cfg.dim);
  r.key_bits_per_fpn = static_cast<double>(r.key_bits_per_token) / d;
  r.value_bits_per_fpn = static_cast<double>(r.value_bits_per_token) / d;
  r.bits_per_fpn = 0.5 * (r.key_bits_per_fpn + r.value_bits_per_fpn);
  r.baseline_bits_per_fpn = baseline_bits;
  r.reduction = r.baseline_bits_per_fpn / r.bits_per_fpn;
  const double tokens = static_cast<double>(r.tokens);
  r.compressed_bytes = tokens * static_cast<double>(r.key_bits_per_token + r.value_bits_per_token) / 8.0;
  r.baseline_bytes = tokens * 2.0 * d * baseline_bits / 8.0;
  return r;
}

}  // namespace qjl
