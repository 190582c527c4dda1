#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qjl/kvcache.hpp"
#include "qjl/value_quant.hpp"

namespace qjl {

// QJLC cache file, little-endian throughout.
//
// Header (80 bytes):
//   0   4  magic "QJLC"
//   4   2  version (u16, currently 1)
//   6   2  flags (u16): bit 0 = orthogonalized sketches
//   8   8  d
//   16  8  h (outlier channel count)
//   24  8  m_in
//   32  8  m_out
//   40  8  n (tokens)
//   48  1  b (value bit width)
//   49  7  reserved, zero
//   56  8  master seed
//   64  8  inlier sketch seed  = derive_seed(master, 0)
//   72  8  outlier sketch seed = derive_seed(master, 1)
// Profile:
//   h x u64 outlier channel indices (ascending)
//   u8 has_magnitudes, then d x f64 mean |k_c| when set
// Entries, n times in append order:
//   ceil(m_in/64)  x u64 inlier sign words, f16 inlier norm
//   ceil(m_out/64) x u64 outlier sign words, f16 outlier norm
//   f16 zero, f16 scale, ceil(d*b/8) bytes of b-bit value codes (LSB first)
//
// Sketches are not stored; they are regenerated from the seeds. Norms and the
// value zero/scale are stored at half precision, so a reloaded cache carries
// those constants rounded to float16.

inline constexpr std::uint16_t kCacheFileVersion = 1;
inline constexpr std::size_t kCacheHeaderBytes = 80;

struct CacheFile {
  KeyCacheState keys;
  std::vector<QuantizedValueToken> values;
  std::uint64_t inlier_seed = 0;
  std::uint64_t outlier_seed = 0;
};

std::string encode_cache(const KeyCacheState& keys, std::span<const QuantizedValueToken> values);
CacheFile decode_cache(std::string_view bytes);

void write_cache(const std::filesystem::path& path, const KeyCacheState& keys,
                 std::span<const QuantizedValueToken> values);
CacheFile read_cache(const std::filesystem::path& path);

}  // namespace qjl
