#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "qjl/error.hpp"
#include "qjl/value_quant.hpp"

namespace {

TEST_CASE("ValueQuant.HandArithmetic") {
  const auto t = qjl::quantize_value(std::vector<double>{1, 2, 3}, 2);
  CHECK_EQ(t.zero, 1.0);
  CHECK(t.scale == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  // (2-1)/(2/3) = 1.5 rounds half to even.
  CHECK_EQ(t.codes, (std::vector<std::uint8_t>{0, 2, 3}));
  const auto v = qjl::dequantize_value(t);
  CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(1.0 + 4.0 / 3.0).epsilon(1e-14));
  CHECK(v[2] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(std::abs((std::abs(v[1] - 2.0)) - (t.scale / 2)) <= 1e-15);
}

TEST_CASE("ValueQuant.ConstantTokenIsExact") {
  for (unsigned b : {1U, 3U, 8U}) {
    const auto t = qjl::quantize_value(std::vector<double>{5, 5, 5}, b);
    CHECK_EQ(t.scale, 0.0);
    CHECK_EQ(t.codes, (std::vector<std::uint8_t>{0, 0, 0}));
    CHECK_EQ(qjl::dequantize_value(t), (std::vector<double>{5, 5, 5}));
  }
}

TEST_CASE("ValueQuant.ErrorWithinHalfStep") {
  std::mt19937_64 gen(41);
  std::normal_distribution<double> nd(0.0, 3.0);
  for (unsigned b : {2U, 3U, 4U, 8U}) {
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> v(64);
      for (auto& x : v) x = nd(gen);
      const auto q = qjl::quantize_value(v, b);
      const auto back = qjl::dequantize_value(q);
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double ulp = std::nextafter(std::abs(v[i]) + std::abs(q.zero), INFINITY) - (std::abs(v[i]) + std::abs(q.zero));
        REQUIRE_MESSAGE(std::abs(back[i] - v[i]) <= q.scale / 2 + 4 * ulp, "b=" << b);
        REQUIRE_LT(q.codes[i], 1U << b);
      }
    }
  }
}

TEST_CASE("ValueQuant.ExtremesMapToEndCodes") {
  const auto t = qjl::quantize_value(std::vector<double>{-2, 0.3, 7}, 4);
  CHECK_EQ(t.codes.front(), 0);
  CHECK_EQ(t.codes.back(), 15);
}

TEST_CASE("ValueQuant.BitWidthRange") {
  CHECK_THROWS_AS(qjl::quantize_value(std::vector<double>{1, 2}, 0), qjl::InvalidArgument);
  CHECK_THROWS_AS(qjl::quantize_value(std::vector<double>{1, 2}, 9), qjl::InvalidArgument);
}

}  // namespace
