#include <doctest.h>

#include <random>

#include "qjl/bitpack.hpp"
#include "qjl/error.hpp"

namespace {

TEST_CASE("Bitpack.DocumentedByteLayout") {
  const std::vector<std::int8_t> signs{1, -1, 1, 1, -1, -1, 1, -1};
  const auto p = qjl::pack_signs(signs);
  REQUIRE_EQ(p.words().size(), 1U);
  // Index order 1,0,1,1,0,0,1,0 packed LSB-first.
  CHECK_EQ(p.words()[0], 0x4DU);
  CHECK_EQ(qjl::unpack_signs(p, 8), signs);
}

TEST_CASE("Bitpack.SingleBit") {
  for (std::int8_t s : {std::int8_t{1}, std::int8_t{-1}}) {
    const auto p = qjl::pack_signs(std::vector<std::int8_t>{s});
    CHECK_EQ(qjl::unpack_signs(p, 1), std::vector<std::int8_t>{s});
  }
}

TEST_CASE("Bitpack.RandomRoundTrip") {
  std::mt19937_64 gen(17);
  for (std::size_t m = 1; m <= 513; ++m) {
    std::vector<std::int8_t> signs(m);
    for (auto& s : signs) s = (gen() & 1) ? 1 : -1;
    const auto p = qjl::pack_signs(signs);
    REQUIRE_EQ(p.words().size(), qjl::words_for_bits(m));
    REQUIRE_MESSAGE(qjl::unpack_signs(p, m) == signs, "m=" << m);
    if (m % 64 != 0) CHECK_MESSAGE((p.words().back() >> (m % 64)) == 0U, "padding must be zero");
    std::size_t pos = 0;
    for (auto s : signs) pos += s > 0;
    CHECK_EQ(p.count_positive(), pos);
  }
}

TEST_CASE("Bitpack.Errors") {
  CHECK_THROWS_AS(qjl::pack_signs(std::vector<std::int8_t>{1, 0}), qjl::InvalidArgument);
  const auto p = qjl::pack_signs(std::vector<std::int8_t>{1, -1, 1});
  CHECK_THROWS_AS(qjl::unpack_signs(p, 4), qjl::InvalidArgument);
  CHECK_THROWS_AS(qjl::unpack_signs(std::vector<std::uint64_t>{1, 0}, 3), qjl::InvalidArgument);
  CHECK_THROWS_AS(qjl::PackedSigns::from_words({0x10}, 3), qjl::InvalidArgument);
  CHECK_NOTHROW(qjl::PackedSigns::from_words({0x5}, 3));
}

}  // namespace
