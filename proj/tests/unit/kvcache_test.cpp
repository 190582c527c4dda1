#include <doctest.h>

#include <random>
#include <thread>

#include "../oracle.hpp"
#include "qjl/error.hpp"
#include "qjl/estimator.hpp"
#include "qjl/harness.hpp"
#include "qjl/kvcache.hpp"
#include "qjl/rng.hpp"

namespace {

qjl::KeyCacheState make_cache(std::size_t d, std::size_t h, std::size_t m_in, std::size_t m_out,
                              std::vector<std::size_t> channels = {}, std::uint64_t seed = 42) {
  if (channels.empty())
    for (std::size_t i = 0; i < h; ++i) channels.push_back(i);
  return qjl::KeyCacheState(qjl::KeyCacheConfig{d, h, m_in, m_out, seed, false},
                            qjl::OutlierProfile::from_channels(d, channels));
}

TEST_CASE("Outliers.DominantChannel") {
  qjl::Matrix prompt(5, 4);
  for (std::size_t i = 0; i < 5; ++i) {
    prompt(i, 0) = 1;
    prompt(i, 1) = 1;
    prompt(i, 2) = 10;
    prompt(i, 3) = 1;
  }
  const auto p = qjl::detect_outliers(prompt, 1);
  CHECK_EQ(p.outlier_channels, std::vector<std::size_t>{2});
  CHECK_EQ(p.inlier_channels(), (std::vector<std::size_t>{0, 1, 3}));
}

TEST_CASE("Outliers.DegenerateCounts") {
  qjl::Matrix prompt(2, 3, 1.0);
  CHECK(qjl::detect_outliers(prompt, 0).outlier_channels.empty());
  const auto all = qjl::detect_outliers(prompt, 3);
  CHECK_EQ(all.outlier_channels, (std::vector<std::size_t>{0, 1, 2}));
  CHECK(all.inlier_channels().empty());
  CHECK_THROWS_AS(qjl::detect_outliers(qjl::Matrix(0, 3), 1), qjl::InvalidArgument);
  CHECK_THROWS_AS(qjl::detect_outliers(prompt, 4), qjl::InvalidArgument);
}

TEST_CASE("Outliers.TiesGoToLowerIndex") {
  qjl::Matrix prompt(1, 4, 2.0);
  CHECK_EQ(qjl::detect_outliers(prompt, 2).outlier_channels, (std::vector<std::size_t>{0, 1}));
}

TEST_CASE("Outliers.PlantedChannelsRecovered") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = qjl::generate_synthetic_stream(64, 128, qjl::Distribution::Outlier, seed);
    CHECK_MESSAGE(qjl::detect_outliers(s.keys, 4).outlier_channels == s.planted_channels, "seed " << seed);
  }
}

TEST_CASE("KeyCache.ConfigValidation") {
  CHECK_THROWS_AS(make_cache(0, 0, 8, 0), qjl::InvalidArgument);
  CHECK_THROWS_AS(make_cache(16, 0, 0, 0), qjl::InvalidArgument);
  CHECK_THROWS_AS(make_cache(16, 2, 8, 0), qjl::InvalidArgument);
  // m_out/h must be at least m_in/(d-h): 2/2 < 28/14.
  CHECK_THROWS_AS(make_cache(16, 2, 28, 2), qjl::InvalidArgument);
  CHECK_NOTHROW(make_cache(16, 2, 28, 4));
  CHECK_THROWS_AS(qjl::KeyCacheState(qjl::KeyCacheConfig{16, 1, 8, 8, 1, false}, qjl::OutlierProfile::none(16)), qjl::InvalidArgument);
}

TEST_CASE("KeyCache.NoOutliersReducesToSingleSketch") {
  auto c = make_cache(8, 0, 32, 99);
  CHECK_EQ(c.outlier_sketch(), nullptr);
  REQUIRE_NE(c.inlier_sketch(), nullptr);
  CHECK_EQ(c.config().outlier_sketch_dim, 0U);
  std::mt19937_64 gen(1);
  const auto k = oracle::random_vector(gen, 8);
  c.append(k);
  const auto e = c.entry(0);
  CHECK_EQ(e.outlier.m(), 0U);
  CHECK_EQ(e.outlier.norm, 0.0);
  CHECK_EQ(e.inlier, qjl::quantize_key(*c.inlier_sketch(), k));
  const auto q = oracle::random_vector(gen, 8);
  const double plain = qjl::estimate_inner_product(qjl::sketch_query(*c.inlier_sketch(), q), e.inlier);
  CHECK_EQ(c.estimate_logits(q)[0], plain);
}

TEST_CASE("KeyCache.AllOutliersLeavesInlierEmpty") {
  auto c = make_cache(4, 4, 16, 16);
  CHECK_EQ(c.inlier_sketch(), nullptr);
  c.append(std::vector<double>{1, 2, 3, 4});
  CHECK_EQ(c.entry(0).inlier.m(), 0U);
  CHECK_EQ(c.entry(0).outlier.m(), 16U);
}

TEST_CASE("KeyCache.SketchSeedsFollowStreams") {
  auto c = make_cache(16, 2, 28, 16, {3, 9}, 1234);
  CHECK_EQ(*c.inlier_sketch(), qjl::generate_gaussian(28, 14, qjl::derive_seed(1234, qjl::kInlierSketchStream)));
  CHECK_EQ(*c.outlier_sketch(), qjl::generate_gaussian(16, 2, qjl::derive_seed(1234, qjl::kOutlierSketchStream)));
}

TEST_CASE("KeyCache.ReplayMatchesDirectQuantization") {
  auto c = make_cache(16, 2, 28, 16, {3, 9});
  std::mt19937_64 gen(2);
  std::vector<std::vector<double>> keys;
  for (int i = 0; i < 100; ++i) {
    keys.push_back(oracle::random_vector(gen, 16));
    c.append(keys.back());
  }
  REQUIRE_EQ(c.size(), 100U);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    std::vector<double> in, out;
    for (std::size_t j = 0; j < 16; ++j) (j == 3 || j == 9 ? out : in).push_back(keys[i][j]);
    const auto split = c.split(keys[i]);
    CHECK_EQ(split.inlier, in);
    CHECK_EQ(split.outlier, out);
    const auto e = c.entry(i);
    CHECK_EQ(e.inlier, qjl::quantize_key(*c.inlier_sketch(), in));
    CHECK_EQ(e.outlier, qjl::quantize_key(*c.outlier_sketch(), out));
  }
  CHECK_THROWS_AS(c.entry(100), qjl::InvalidArgument);
  CHECK_THROWS_AS(c.append(std::vector<double>(15)), qjl::InvalidArgument);
}

TEST_CASE("KeyCache.AppendQuantizedRoundTrip") {
  auto a = make_cache(16, 2, 28, 16);
  auto b = make_cache(16, 2, 28, 16);
  a.append(std::vector<double>(16, 0.5));
  b.append_quantized(a.entry(0));
  CHECK_EQ(a.entry(0), b.entry(0));
  auto bad = a.entry(0);
  bad.inlier.bits = qjl::PackedSigns(27);
  CHECK_THROWS_AS(b.append_quantized(bad), qjl::InvalidArgument);
}

TEST_CASE("KeyCache.ScoresSingleTokenAndSymmetry") {
  auto c = make_cache(8, 0, 16, 0);
  std::mt19937_64 gen(3);
  const auto q = oracle::random_vector(gen, 8);
  CHECK_THROWS_AS(c.estimate_scores(q), qjl::InvalidState);
  const auto k = oracle::random_vector(gen, 8);
  c.append(k);
  CHECK_EQ(c.estimate_scores(q).weights, std::vector<double>{1.0});
  for (int i = 0; i < 9; ++i) c.append(k);
  for (double w : c.estimate_scores(q).weights) CHECK_EQ(w, 0.1);
}

TEST_CASE("KeyCache.ThreadedLogitsMatchSerial") {
  auto c = make_cache(32, 4, 64, 32);
  std::mt19937_64 gen(4);
  for (int i = 0; i < 1000; ++i) c.append(oracle::random_vector(gen, 32));
  const auto q = oracle::random_vector(gen, 32);
  CHECK_EQ(c.estimate_logits(q, 1), c.estimate_logits(q, 4));
}

TEST_CASE("KeyCache.ConcurrentAppendAndRead") {
  auto c = make_cache(16, 0, 32, 0);
  c.append(std::vector<double>(16, 1.0));
  std::thread writer([&] {
    for (int i = 0; i < 500; ++i) c.append(std::vector<double>(16, 1.0));
  });
  for (int i = 0; i < 200; ++i) {
    const auto w = c.estimate_scores(std::vector<double>(16, 0.1)).weights;
    REQUIRE_FALSE(w.empty());
  }
  writer.join();
  CHECK_EQ(c.size(), 501U);
}

TEST_CASE("MemoryReport.ThreeBitConfiguration") {
  auto c = make_cache(128, 0, 368, 0);
  CHECK_THROWS_AS(qjl::memory_report(c, 3), qjl::InvalidState);
  c.append(std::vector<double>(128, 1.0));
  const auto r = qjl::memory_report(c, 3, 16, 32);
  CHECK(r.key_bits_per_fpn == doctest::Approx(3.125).epsilon(1e-14));
  CHECK(r.value_bits_per_fpn == doctest::Approx(3.25).epsilon(1e-14));
  CHECK(r.reduction == doctest::Approx(16.0 / 3.1875).epsilon(1e-14));
  CHECK_GT(r.reduction, 5.0);
}

TEST_CASE("MemoryReport.OutlierSketchCounted") {
  auto c = make_cache(128, 4, 336, 32);
  c.append(std::vector<double>(128, 1.0));
  CHECK(qjl::memory_report(c, 3).key_bits_per_fpn == doctest::Approx((336.0 + 32 + 32) / 128).epsilon(1e-14));
}

}  // namespace
