#include "qjl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "parallel.hpp"
#include "qjl/error.hpp"
#include "qjl/estimator.hpp"
#include "qjl/kvcache.hpp"
#include "qjl/rng.hpp"
#include "qjl/sketch.hpp"
#include "qjl/softmax.hpp"

namespace qjl {

namespace {

constexpr std::uint64_t kPlantStream = 0;
constexpr std::uint64_t kPairStream = 1;
constexpr std::uint64_t kTrialStream = 2;
constexpr double kMeanBand = 4.0;
constexpr double kScorePassRate = 0.99;
constexpr double kVarianceRatioLimit = 1.05;

void fill_gaussian(Rng& rng, std::span<double> row) {
  for (auto& v : row) v = rng.normal();
}

void normalize(std::span<double> row) {
  double sq = 0.0;
  for (double v : row) sq += v * v;
  const double norm = std::sqrt(sq);
  for (auto& v : row) v /= norm;
}

std::vector<std::size_t> pick_channels(Rng& rng, std::size_t d, std::size_t count) {
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) std::swap(perm[i], perm[i + rng.below(d - i)]);
  perm.resize(count);
  std::sort(perm.begin(), perm.end());
  return perm;
}

std::uint64_t trial_seed(const TrialConfig& cfg, std::size_t t) {
  return derive_seed(derive_seed(cfg.seed, kTrialStream), t);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct Pair {
  std::vector<double> query;
  std::vector<double> key;
};

/// One (q, k) pair from the config's distribution, independent of the trial sketches.
Pair draw_pair(const TrialConfig& cfg) {
  const auto stream = generate_synthetic_stream(cfg.dim, 1, cfg.distribution, derive_seed(cfg.seed, kPairStream),
                                                cfg.outlier_factor);
  const auto q = stream.queries.row(0);
  const auto k = stream.keys.row(0);
  return {{q.begin(), q.end()}, {k.begin(), k.end()}};
}

void check_pair(const TrialConfig& cfg, std::span<const double> q, std::span<const double> k) {
  if (q.size() != cfg.dim || k.size() != cfg.dim) {
    throw InvalidArgument("trial: query/key dimension does not match cfg.dim");
  }
}

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs, double mean) {
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(xs.size() - 1);
}

/// Nearest-rank percentile of a sorted sample.
double percentile(const std::vector<double>& sorted, double p) {
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

std::vector<double> estimates_over_trials(const TrialConfig& cfg, std::span<const double> q, std::span<const double> k,
                                          bool orthogonal) {
  std::vector<double> est(cfg.trials);
  detail::parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
    const auto sketch = generate_sketch(cfg.sketch_dim, cfg.dim, trial_seed(cfg, t), orthogonal);
    est[t] = estimate_inner_product(sketch_query(sketch, q), quantize_key(sketch, k));
  });
  return est;
}

TrialReport base_report(const char* suite, const TrialConfig& cfg) {
  TrialReport r;
  r.suite = suite;
  r.trials = cfg.trials;
  r.dim = cfg.dim;
  r.sketch_dim = cfg.sketch_dim;
  return r;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string_view to_string(Distribution dist) {
  switch (dist) {
    case Distribution::Sphere: return "sphere";
    case Distribution::Gaussian: return "gaussian";
    case Distribution::Outlier: return "outlier";
  }
  return "unknown";
}

Distribution parse_distribution(std::string_view name) {
  if (name == "sphere") return Distribution::Sphere;
  if (name == "gaussian") return Distribution::Gaussian;
  if (name == "outlier") return Distribution::Outlier;
  throw InvalidArgument("unknown distribution '" + std::string(name) + "' (expected sphere, gaussian or outlier)");
}

SyntheticStream generate_synthetic_stream(std::size_t d, std::size_t n, Distribution dist, std::uint64_t seed,
                                          double outlier_factor) {
  if (d == 0 || n == 0) throw InvalidArgument("synthetic stream: d and n must be positive");
  if (dist == Distribution::Outlier && d < kPlantedOutlierChannels) {
    throw InvalidArgument("synthetic stream: outlier distribution needs d >= " +
                          std::to_string(kPlantedOutlierChannels));
  }
  SyntheticStream s{Matrix(n, d), Matrix(n, d), Matrix(n, d), {}};
  Rng rng(derive_seed(seed, kPlantStream));
  if (dist == Distribution::Outlier) s.planted_channels = pick_channels(rng, d, kPlantedOutlierChannels);

  for (Matrix* m : {&s.keys, &s.values, &s.queries}) {
    for (std::size_t i = 0; i < n; ++i) {
      auto row = m->row(i);
      fill_gaussian(rng, row);
      if (dist == Distribution::Sphere) normalize(row);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (auto c : s.planted_channels) s.keys(i, c) *= outlier_factor;
  }
  return s;
}

std::size_t required_m(double epsilon, double delta) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("required_m: epsilon must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("required_m: delta must lie in (0, 1)");
  return static_cast<std::size_t>(std::ceil(4.0 / 3.0 * (1.0 + epsilon) / (epsilon * epsilon) * std::log(2.0 / delta)));
}

std::size_t required_m_scores(double epsilon, double radius, std::size_t n) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("required_m_scores: epsilon must lie in (0, 1)");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidArgument("required_m_scores: r must be positive");
  if (n < 2) throw InvalidArgument("required_m_scores: n must be at least 2");
  return static_cast<std::size_t>(
      std::ceil(2.0 * radius * radius / (epsilon * epsilon) * std::log(static_cast<double>(n))));
}

void TrialConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("trial config: epsilon must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("trial config: delta must lie in (0, 1)");
  if (trials < 100) throw InvalidArgument("trial config: need at least 100 trials");
  if (dim == 0 || sketch_dim == 0 || tokens == 0) throw InvalidArgument("trial config: dimensions must be positive");
}

std::vector<std::string> TrialReport::record_keys() {
  return {"suite",          "passed",        "trials",        "dim",           "sketch_dim",
          "required_m",     "truth",         "mean_estimate", "bias",          "std_error",
          "z_score",        "failure_fraction", "threshold",  "pass_fraction", "score_err_p50",
          "score_err_p90",  "score_err_p99", "score_err_max", "variance_iid",  "variance_orthogonal",
          "variance_ratio"};
}

std::vector<std::pair<std::string, std::string>> TrialReport::record() const {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  return {
      {"suite", suite},
      {"passed", passed ? "true" : "false"},
      {"trials", std::to_string(trials)},
      {"dim", std::to_string(dim)},
      {"sketch_dim", std::to_string(sketch_dim)},
      {"required_m", required_sketch_dim ? std::to_string(*required_sketch_dim) : std::string()},
      {"truth", opt(truth)},
      {"mean_estimate", opt(mean_estimate)},
      {"bias", opt(bias)},
      {"std_error", opt(std_error)},
      {"z_score", opt(z_score)},
      {"failure_fraction", opt(failure_fraction)},
      {"threshold", opt(threshold)},
      {"pass_fraction", opt(pass_fraction)},
      {"score_err_p50", opt(score_err_p50)},
      {"score_err_p90", opt(score_err_p90)},
      {"score_err_p99", opt(score_err_p99)},
      {"score_err_max", opt(score_err_max)},
      {"variance_iid", opt(variance_iid)},
      {"variance_orthogonal", opt(variance_orthogonal)},
      {"variance_ratio", opt(variance_ratio)},
  };
}

TrialReport run_unbiasedness_trial(const TrialConfig& cfg) {
  cfg.validate();
  const auto pair = draw_pair(cfg);
  return run_unbiasedness_trial(cfg, pair.query, pair.key);
}

TrialReport run_unbiasedness_trial(const TrialConfig& cfg, std::span<const double> query,
                                   std::span<const double> key) {
  cfg.validate();
  check_pair(cfg, query, key);
  const auto est = estimates_over_trials(cfg, query, key, cfg.orthogonalize);
  auto r = base_report("unbiasedness", cfg);
  const double truth = dot(query, key);
  const double mean = mean_of(est);
  const double se = std::sqrt(sample_variance(est, mean) / static_cast<double>(est.size()));
  const double bias = mean - truth;
  r.truth = truth;
  r.mean_estimate = mean;
  r.bias = bias;
  r.std_error = se;
  if (se > 0.0) {
    r.z_score = bias / se;
  } else {
    r.z_score = bias == 0.0 ? 0.0 : std::copysign(INFINITY, bias);
  }
  r.threshold = kMeanBand;
  r.passed = std::abs(*r.z_score) <= kMeanBand;
  return r;
}

TrialReport run_distortion_trial(const TrialConfig& cfg) {
  cfg.validate();
  const auto pair = draw_pair(cfg);
  return run_distortion_trial(cfg, pair.query, pair.key);
}

TrialReport run_distortion_trial(const TrialConfig& cfg, std::span<const double> query, std::span<const double> key) {
  cfg.validate();
  check_pair(cfg, query, key);
  const auto est = estimates_over_trials(cfg, query, key, cfg.orthogonalize);
  auto r = base_report("distortion", cfg);
  const double truth = dot(query, key);
  const double tolerance = cfg.epsilon * l2(query) * l2(key);
  const auto failures = std::count_if(est.begin(), est.end(), [&](double e) { return std::abs(e - truth) > tolerance; });
  r.required_sketch_dim = required_m(cfg.epsilon, cfg.delta);
  r.truth = truth;
  r.mean_estimate = mean_of(est);
  r.failure_fraction = static_cast<double>(failures) / static_cast<double>(est.size());
  r.threshold = cfg.delta;
  r.passed = *r.failure_fraction <= cfg.delta;
  return r;
}

TrialReport run_score_trial(const TrialConfig& cfg) {
  cfg.validate();
  const auto stream = generate_synthetic_stream(cfg.dim, cfg.tokens, cfg.distribution,
                                                derive_seed(cfg.seed, kPairStream), cfg.outlier_factor);
  return run_score_trial(cfg, stream.keys, stream.queries.row(0));
}

TrialReport run_score_trial(const TrialConfig& cfg, const Matrix& keys, std::span<const double> query) {
  cfg.validate();
  if (keys.rows() == 0) throw InvalidArgument("score trial: no keys");
  if (keys.cols() != cfg.dim || query.size() != cfg.dim) {
    throw InvalidArgument("score trial: key/query dimension does not match cfg.dim");
  }
  std::vector<double> logits(keys.rows());
  for (std::size_t i = 0; i < keys.rows(); ++i) logits[i] = dot(query, keys.row(i));
  const auto exact = softmax(logits);

  std::vector<double> worst(cfg.trials);
  detail::parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
    KeyCacheConfig kc{cfg.dim, 0, cfg.sketch_dim, 0, trial_seed(cfg, t), cfg.orthogonalize};
    KeyCacheState state(kc, OutlierProfile::none(cfg.dim));
    for (std::size_t i = 0; i < keys.rows(); ++i) state.append(keys.row(i));
    const auto approx = state.estimate_scores(query);
    double w = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
      w = std::max(w, std::abs(approx[i] - exact[i]) / exact[i]);
    }
    worst[t] = w;
  });

  auto r = base_report("scores", cfg);
  const double bound = 3.0 * cfg.epsilon;
  if (keys.rows() >= 2) r.required_sketch_dim = required_m_scores(cfg.epsilon, 1.0, keys.rows());
  const auto ok = std::count_if(worst.begin(), worst.end(), [&](double w) { return w <= bound; });
  r.pass_fraction = static_cast<double>(ok) / static_cast<double>(worst.size());
  r.failure_fraction = 1.0 - *r.pass_fraction;
  std::sort(worst.begin(), worst.end());
  r.score_err_p50 = percentile(worst, 0.50);
  r.score_err_p90 = percentile(worst, 0.90);
  r.score_err_p99 = percentile(worst, 0.99);
  r.score_err_max = worst.back();
  r.threshold = bound;
  r.passed = *r.pass_fraction >= kScorePassRate;
  return r;
}

TrialReport run_orthogonal_comparison(const TrialConfig& cfg) {
  cfg.validate();
  const auto pair = draw_pair(cfg);
  return run_orthogonal_comparison(cfg, pair.query, pair.key);
}

TrialReport run_orthogonal_comparison(const TrialConfig& cfg, std::span<const double> query,
                                      std::span<const double> key) {
  cfg.validate();
  check_pair(cfg, query, key);
  std::vector<double> iid(cfg.trials);
  std::vector<double> orth(cfg.trials);
  detail::parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
    const auto gaussian = generate_gaussian(cfg.sketch_dim, cfg.dim, trial_seed(cfg, t));
    const auto rotated = orthogonalize(gaussian);
    iid[t] = estimate_inner_product(sketch_query(gaussian, query), quantize_key(gaussian, key));
    orth[t] = estimate_inner_product(sketch_query(rotated, query), quantize_key(rotated, key));
  });
  auto r = base_report("orthogonal", cfg);
  const double var_iid = sample_variance(iid, mean_of(iid));
  const double var_orth = sample_variance(orth, mean_of(orth));
  r.truth = dot(query, key);
  r.variance_iid = var_iid;
  r.variance_orthogonal = var_orth;
  r.variance_ratio = var_iid > 0.0 ? var_orth / var_iid : (var_orth == 0.0 ? 1.0 : INFINITY);
  r.threshold = kVarianceRatioLimit;
  r.passed = *r.variance_ratio <= kVarianceRatioLimit;
  return r;
}

}  // namespace qjl
