#include "qjl/cache_file.hpp"

#include <cmath>

#include "byte_io.hpp"
#include "qjl/error.hpp"
#include "qjl/rng.hpp"

namespace qjl {

namespace {

constexpr double kHalfMax = 65504.0;

void put_half(detail::ByteWriter& w, double v, const char* what) {
  if (!std::isfinite(v) || std::abs(v) > kHalfMax) {
    throw InvalidArgument(std::string("QJLC cache: ") + what + " " + std::to_string(v) + " exceeds float16 range");
  }
  w.f16(v);
}

void put_key(detail::ByteWriter& w, const QuantizedKey& key) {
  for (auto word : key.bits.words()) w.u64(word);
  put_half(w, key.norm, "key norm");
}

QuantizedKey get_key(detail::ByteReader& r, std::size_t m) {
  std::vector<std::uint64_t> words(words_for_bits(m));
  for (auto& word : words) word = r.u64();
  QuantizedKey key;
  try {
    key.bits = PackedSigns::from_words(std::move(words), m);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("QJLC cache: ") + e.what());
  }
  key.norm = r.f16();
  if (!(key.norm >= 0.0) || !std::isfinite(key.norm)) throw FormatError("QJLC cache: invalid key norm");
  return key;
}

std::size_t code_bytes(std::size_t d, unsigned bits) { return (d * bits + 7) / 8; }

}  // namespace

std::string encode_cache(const KeyCacheState& keys, std::span<const QuantizedValueToken> values) {
  const auto& cfg = keys.config();
  const std::size_t n = keys.size();
  if (values.size() != n) {
    throw InvalidArgument("QJLC cache: " + std::to_string(n) + " keys but " + std::to_string(values.size()) +
                          " value tokens");
  }
  const unsigned bits = values.empty() ? 0 : values.front().bits;
  for (const auto& t : values) {
    if (t.bits != bits || t.codes.size() != cfg.dim) {
      throw InvalidArgument("QJLC cache: value tokens must share bit width and dimension d");
    }
  }

  detail::ByteWriter w;
  w.bytes("QJLC");
  w.u16(kCacheFileVersion);
  w.u16(cfg.orthogonalize ? 1 : 0);
  w.u64(cfg.dim);
  w.u64(cfg.outliers);
  w.u64(cfg.inlier_sketch_dim);
  w.u64(cfg.outlier_sketch_dim);
  w.u64(n);
  w.u8(static_cast<std::uint8_t>(bits));
  for (int i = 0; i < 7; ++i) w.u8(0);
  w.u64(cfg.seed);
  w.u64(derive_seed(cfg.seed, kInlierSketchStream));
  w.u64(derive_seed(cfg.seed, kOutlierSketchStream));

  const auto& profile = keys.profile();
  for (auto c : profile.outlier_channels) w.u64(c);
  const bool has_magnitudes = profile.channel_magnitude.size() == cfg.dim;
  w.u8(has_magnitudes ? 1 : 0);
  if (has_magnitudes) {
    for (double m : profile.channel_magnitude) w.f64(m);
  }

  std::string codes;
  for (std::size_t j = 0; j < n; ++j) {
    const auto e = keys.entry(j);
    put_key(w, e.inlier);
    put_key(w, e.outlier);
    const auto& t = values[j];
    put_half(w, t.zero, "value zero");
    put_half(w, t.scale, "value scale");
    codes.assign(code_bytes(cfg.dim, bits), '\0');
    for (std::size_t c = 0; c < cfg.dim; ++c) {
      for (unsigned b = 0; b < bits; ++b) {
        if ((t.codes[c] >> b) & 1U) {
          const std::size_t pos = c * bits + b;
          codes[pos >> 3] = static_cast<char>(codes[pos >> 3] | (1 << (pos & 7)));
        }
      }
    }
    w.bytes(codes);
  }
  return w.take();
}

CacheFile decode_cache(std::string_view bytes) {
  detail::ByteReader r(bytes, "QJLC cache");
  if (r.bytes(4) != "QJLC") throw FormatError("QJLC cache: bad magic");
  const auto version = r.u16();
  if (version != kCacheFileVersion) throw FormatError("QJLC cache: unsupported version " + std::to_string(version));
  const auto flags = r.u16();
  if (flags & ~1U) throw FormatError("QJLC cache: unknown flag bits");

  KeyCacheConfig cfg;
  cfg.orthogonalize = (flags & 1U) != 0;
  cfg.dim = r.u64();
  cfg.outliers = r.u64();
  cfg.inlier_sketch_dim = r.u64();
  cfg.outlier_sketch_dim = r.u64();
  const auto n = r.u64();
  const unsigned bits = r.u8();
  for (int i = 0; i < 7; ++i) {
    if (r.u8() != 0) throw FormatError("QJLC cache: reserved header bytes must be zero");
  }
  cfg.seed = r.u64();
  const auto inlier_seed = r.u64();
  const auto outlier_seed = r.u64();
  if (inlier_seed != derive_seed(cfg.seed, kInlierSketchStream) ||
      outlier_seed != derive_seed(cfg.seed, kOutlierSketchStream)) {
    throw FormatError("QJLC cache: sketch seeds do not derive from the master seed");
  }
  if (cfg.dim == 0 || cfg.outliers > cfg.dim) throw FormatError("QJLC cache: invalid d/h in header");
  if (n > 0 && (bits < 1 || bits > 8)) throw FormatError("QJLC cache: invalid value bit width " + std::to_string(bits));
  // Each entry needs at least 8 bytes (two norms, zero, scale); reject absurd n before allocating.
  if (n > bytes.size() / 8 + 1) throw FormatError("QJLC cache: token count exceeds file size");

  std::vector<std::size_t> channels(cfg.outliers);
  for (auto& c : channels) c = r.u64();
  OutlierProfile profile;
  try {
    profile = OutlierProfile::from_channels(cfg.dim, channels);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("QJLC cache: ") + e.what());
  }
  if (profile.outlier_channels != channels) throw FormatError("QJLC cache: outlier channels not ascending");
  const auto has_magnitudes = r.u8();
  if (has_magnitudes > 1) throw FormatError("QJLC cache: bad profile flag");
  if (has_magnitudes) {
    if (cfg.dim > r.remaining() / 8) throw FormatError("QJLC cache: truncated");
    profile.channel_magnitude.resize(cfg.dim);
    for (auto& m : profile.channel_magnitude) m = r.f64();
  }

  auto state = [&] {
    try {
      return KeyCacheState(cfg, std::move(profile));
    } catch (const InvalidArgument& e) {
      throw FormatError(std::string("QJLC cache: ") + e.what());
    }
  }();
  CacheFile out{std::move(state), {}, inlier_seed, outlier_seed};
  const auto& eff = out.keys.config();
  if (eff.inlier_sketch_dim != cfg.inlier_sketch_dim || eff.outlier_sketch_dim != cfg.outlier_sketch_dim) {
    throw FormatError("QJLC cache: sketch dimensions inconsistent with d and h");
  }
  out.values.reserve(n);
  for (std::uint64_t j = 0; j < n; ++j) {
    KeyEntry e;
    e.inlier = get_key(r, cfg.inlier_sketch_dim);
    e.outlier = get_key(r, cfg.outlier_sketch_dim);
    out.keys.append_quantized(std::move(e));

    QuantizedValueToken t;
    t.bits = bits;
    t.zero = r.f16();
    t.scale = r.f16();
    if (!std::isfinite(t.zero) || !(t.scale >= 0.0) || !std::isfinite(t.scale)) {
      throw FormatError("QJLC cache: invalid value zero/scale");
    }
    const auto packed = r.bytes(code_bytes(cfg.dim, bits));
    t.codes.assign(cfg.dim, 0);
    for (std::size_t c = 0; c < cfg.dim; ++c) {
      unsigned code = 0;
      for (unsigned b = 0; b < bits; ++b) {
        const std::size_t pos = c * bits + b;
        code |= ((static_cast<unsigned char>(packed[pos >> 3]) >> (pos & 7)) & 1U) << b;
      }
      t.codes[c] = static_cast<std::uint8_t>(code);
    }
    out.values.push_back(std::move(t));
  }
  r.expect_end();
  return out;
}

void write_cache(const std::filesystem::path& path, const KeyCacheState& keys,
                 std::span<const QuantizedValueToken> values) {
  detail::write_file(path, encode_cache(keys, values));
}

CacheFile read_cache(const std::filesystem::path& path) { return decode_cache(detail::read_file(path)); }

}  // namespace qjl
