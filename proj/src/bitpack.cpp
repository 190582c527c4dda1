#include "qjl/bitpack.hpp"

#include <bit>
#include <string>

#include "qjl/error.hpp"

namespace qjl {

namespace {
std::uint64_t padding_mask(std::size_t m) {
  const std::size_t used = m & 63;
  return used == 0 ? 0 : ~((std::uint64_t{1} << used) - 1);
}
}  // namespace

PackedSigns PackedSigns::from_words(std::vector<std::uint64_t> words, std::size_t m) {
  if (words.size() != words_for_bits(m)) {
    throw InvalidArgument("packed signs: " + std::to_string(words.size()) + " words cannot hold exactly " +
                          std::to_string(m) + " bits");
  }
  if (!words.empty() && (words.back() & padding_mask(m)) != 0) {
    throw InvalidArgument("packed signs: padding bits must be zero");
  }
  PackedSigns p;
  p.words_ = std::move(words);
  p.size_ = m;
  return p;
}

std::size_t PackedSigns::count_positive() const noexcept {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

PackedSigns pack_signs(std::span<const std::int8_t> signs) {
  if (signs.empty()) throw InvalidArgument("pack_signs: need at least one sign");
  PackedSigns out(signs.size());
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] == 1) {
      out.set(i);
    } else if (signs[i] != -1) {
      throw InvalidArgument("pack_signs: entry " + std::to_string(i) + " is not +-1");
    }
  }
  return out;
}

std::vector<std::int8_t> unpack_signs(std::span<const std::uint64_t> words, std::size_t m) {
  if (m == 0 || words.size() != words_for_bits(m)) {
    throw InvalidArgument("unpack_signs: " + std::to_string(words.size()) + " words do not hold " +
                          std::to_string(m) + " signs");
  }
  std::vector<std::int8_t> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = ((words[i >> 6] >> (i & 63)) & 1U) ? 1 : -1;
  return out;
}

std::vector<std::int8_t> unpack_signs(const PackedSigns& bits, std::size_t m) {
  if (bits.size() != m) {
    throw InvalidArgument("unpack_signs: bit count " + std::to_string(bits.size()) + " != m " +
                          std::to_string(m));
  }
  return unpack_signs(bits.words(), m);
}

}  // namespace qjl
