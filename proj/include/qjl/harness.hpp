#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qjl/matrix.hpp"

namespace qjl {

enum class Distribution { Sphere, Gaussian, Outlier };

std::string_view to_string(Distribution dist);
Distribution parse_distribution(std::string_view name);

inline constexpr std::size_t kPlantedOutlierChannels = 4;
inline constexpr double kDefaultOutlierFactor = 10.0;

/// Synthetic (key, value, query) triplets, one row per token.
///
/// sphere:   every row uniform on the unit sphere
/// gaussian: i.i.d. N(0, 1) entries
/// outlier:  gaussian, with kPlantedOutlierChannels key channels (picked from
///           the seed) multiplied by `outlier_factor`
struct SyntheticStream {
  Matrix keys;
  Matrix values;
  Matrix queries;
  /// Sorted; empty unless the distribution is `outlier`.
  std::vector<std::size_t> planted_channels;
};

SyntheticStream generate_synthetic_stream(std::size_t d, std::size_t n, Distribution dist, std::uint64_t seed,
                                          double outlier_factor = kDefaultOutlierFactor);

/// ceil(4/3 * (1 + eps) / eps^2 * ln(2 / delta))
std::size_t required_m(double epsilon, double delta);

/// ceil(2 * r^2 / eps^2 * ln n)
std::size_t required_m_scores(double epsilon, double radius, std::size_t n);

struct TrialConfig {
  std::size_t dim = 64;
  std::size_t sketch_dim = 8;
  /// Cached tokens for the score trial.
  std::size_t tokens = 256;
  double epsilon = 0.25;
  double delta = 0.01;
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
  Distribution distribution = Distribution::Sphere;
  bool orthogonalize = false;
  double outlier_factor = kDefaultOutlierFactor;
  /// Worker threads; reports do not depend on this.
  unsigned threads = 1;

  /// Throws InvalidArgument unless eps, delta in (0, 1), trials >= 100 and dims are positive.
  void validate() const;
};

/// Outcome of one trial suite. Fields a suite does not measure stay empty.
struct TrialReport {
  std::string suite;
  bool passed = false;
  std::size_t trials = 0;
  std::size_t dim = 0;
  std::size_t sketch_dim = 0;
  std::optional<std::size_t> required_sketch_dim;

  std::optional<double> truth;
  std::optional<double> mean_estimate;
  std::optional<double> bias;
  std::optional<double> std_error;
  std::optional<double> z_score;

  std::optional<double> failure_fraction;
  /// delta for the tail suite, 3 * eps for the score suite, 1.05 for the orthogonal comparison.
  std::optional<double> threshold;

  std::optional<double> pass_fraction;
  std::optional<double> score_err_p50;
  std::optional<double> score_err_p90;
  std::optional<double> score_err_p99;
  std::optional<double> score_err_max;

  std::optional<double> variance_iid;
  std::optional<double> variance_orthogonal;
  std::optional<double> variance_ratio;

  /// Column names of record(), in order.
  static std::vector<std::string> record_keys();
  /// Flat key/value row; unmeasured fields are empty strings.
  std::vector<std::pair<std::string, std::string>> record() const;
};

/// Fixes one (q, k) pair drawn from cfg.distribution and averages the
/// estimator over cfg.trials independent sketches. Passes when |z| <= 4.
TrialReport run_unbiasedness_trial(const TrialConfig& cfg);
TrialReport run_unbiasedness_trial(const TrialConfig& cfg, std::span<const double> query, std::span<const double> key);

/// Fraction of sketches with |estimate - <q,k>| > eps ||q|| ||k||. Passes when <= delta.
TrialReport run_distortion_trial(const TrialConfig& cfg);
TrialReport run_distortion_trial(const TrialConfig& cfg, std::span<const double> query, std::span<const double> key);

/// For each of cfg.trials sketch draws, the max over tokens of
/// |est_score(i) - score(i)| / score(i) on a fixed cache of cfg.tokens keys.
/// Passes when at least 99% of draws stay within 3 * eps.
TrialReport run_score_trial(const TrialConfig& cfg);
TrialReport run_score_trial(const TrialConfig& cfg, const Matrix& keys, std::span<const double> query);

/// Estimator variance for i.i.d. sketches against their orthogonalized
/// versions on the same seeds. Passes when var_orth / var_iid <= 1.05.
TrialReport run_orthogonal_comparison(const TrialConfig& cfg);
TrialReport run_orthogonal_comparison(const TrialConfig& cfg, std::span<const double> query,
                                      std::span<const double> key);

}  // namespace qjl
