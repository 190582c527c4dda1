#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace qjl {

// Packed sign layout: contiguous 64-bit words, bit j of word w holds sign
// index 64*w + j (LSB first). Bit value 1 means +1, 0 means -1. Padding bits
// past the last sign are always zero. Serialized as little-endian words.

inline constexpr std::size_t words_for_bits(std::size_t bits) noexcept { return (bits + 63) / 64; }

class PackedSigns {
 public:
  PackedSigns() = default;
  /// m signs, all -1.
  explicit PackedSigns(std::size_t m) : words_(words_for_bits(m), 0), size_(m) {}

  /// Adopts raw words; throws if the word count or padding is inconsistent with m.
  static PackedSigns from_words(std::vector<std::uint64_t> words, std::size_t m);

  std::size_t size() const noexcept { return size_; }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool test(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1U; }
  void set(std::size_t i) noexcept { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  int sign(std::size_t i) const noexcept { return test(i) ? 1 : -1; }

  std::size_t count_positive() const noexcept;

  bool operator==(const PackedSigns&) const = default;

 private:
  std::vector<std::uint64_t> words_;
  std::size_t size_ = 0;
};

/// Packs a +-1 vector. Throws on an empty input or an entry other than +-1.
PackedSigns pack_signs(std::span<const std::int8_t> signs);

/// Expands raw words holding m signs back to +-1; throws if the word count does not match m.
std::vector<std::int8_t> unpack_signs(std::span<const std::uint64_t> words, std::size_t m);
std::vector<std::int8_t> unpack_signs(const PackedSigns& bits, std::size_t m);

}  // namespace qjl
