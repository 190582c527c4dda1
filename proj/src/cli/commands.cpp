#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "qjl/attention.hpp"
#include "qjl/bench.hpp"
#include "qjl/cache_file.hpp"
#include "qjl/cli.hpp"
#include "qjl/error.hpp"
#include "qjl/harness.hpp"
#include "qjl/kvcache.hpp"
#include "qjl/rng.hpp"
#include "qjl/run_config.hpp"
#include "qjl/tensor_file.hpp"

namespace qjl::cli {

namespace {

namespace fs = std::filesystem;

// Stream ids for deriving per-suite seeds from the config seed.
constexpr std::uint64_t kUnbiasednessStream = 10;
constexpr std::uint64_t kDistortionStream = 11;
constexpr std::uint64_t kScoreStream = 12;
constexpr std::uint64_t kOrthogonalStream = 13;

/// Flags shared by every subcommand; each one overrides the config file.
struct Overrides {
  std::optional<std::string> config;
  std::optional<std::size_t> d, n, m_in, m_out, outliers;
  std::optional<unsigned> bits, threads;
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon, delta, temperature, factor;
  std::optional<std::string> dist;
  bool orthogonalize = false;
  CLI::Option* orthogonalize_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON run config; flags override its fields");
    app->add_option("--d", d, "embedding dimension");
    app->add_option("--n", n, "number of tokens");
    app->add_option("--m-in", m_in, "inlier sketch dimension");
    app->add_option("--m-out", m_out, "outlier sketch dimension (0 = 8 per outlier channel)");
    app->add_option("--outliers", outliers, "number of outlier channels h");
    app->add_option("--bits", bits, "value quantization bit width");
    app->add_option("--seed", seed, "master seed (QJL_SEED overrides)");
    app->add_option("--epsilon", epsilon, "distortion epsilon");
    app->add_option("--delta", delta, "failure probability delta");
    app->add_option("--temperature", temperature, "softmax temperature");
    orthogonalize_opt = app->add_flag("--orthogonalize", orthogonalize, "orthogonalize sketch rows (QR)");
    app->add_option("--dist", dist, "synthetic distribution: sphere, gaussian, outlier");
    app->add_option("--factor", factor, "outlier channel magnitude factor");
    app->add_option("--threads", threads, "worker threads");
  }

  RunConfig resolve() const {
    RunConfig cfg = config ? load_run_config(*config) : RunConfig{};
    if (d) cfg.d = *d;
    if (n) cfg.n = *n;
    if (m_in) cfg.m_in = *m_in;
    if (m_out) cfg.m_out = *m_out;
    if (outliers) cfg.outliers = *outliers;
    if (bits) cfg.bits = *bits;
    if (seed) cfg.seed = *seed;
    if (epsilon) cfg.epsilon = *epsilon;
    if (delta) cfg.delta = *delta;
    if (temperature) cfg.temperature = *temperature;
    if (factor) cfg.factor = *factor;
    if (dist) cfg.dist = *dist;
    if (threads) cfg.threads = *threads;
    if (orthogonalize_opt->count() > 0) cfg.orthogonalize = orthogonalize;
    if (const char* env = std::getenv("QJL_SEED"); env != nullptr && *env != '\0') {
      char* end = nullptr;
      errno = 0;
      const auto v = std::strtoull(env, &end, 0);
      if (errno != 0 || *end != '\0' || *env == '-') {
        throw InvalidArgument(std::string("QJL_SEED is not an unsigned integer: '") + env + "'");
      }
      cfg.seed = v;
    }
    cfg.validate();
    return cfg;
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

Matrix head_rows(const Matrix& m, std::size_t count) {
  count = std::min(count, m.rows());
  Matrix out(count, m.cols());
  for (std::size_t i = 0; i < count; ++i) std::copy(m.row(i).begin(), m.row(i).end(), out.row(i).begin());
  return out;
}

void print_memory_report(std::ostream& out, const MemoryReport& r) {
  out << "tokens=" << r.tokens << "\n"
      << "d=" << r.dim << "\n"
      << "key_bits_per_token=" << r.key_bits_per_token << "\n"
      << "value_bits_per_token=" << r.value_bits_per_token << "\n"
      << "key_bits_per_fpn=" << fmt(r.key_bits_per_fpn) << "\n"
      << "value_bits_per_fpn=" << fmt(r.value_bits_per_fpn) << "\n"
      << "bits_per_fpn=" << fmt(r.bits_per_fpn) << "\n"
      << "baseline_bits_per_fpn=" << fmt(r.baseline_bits_per_fpn) << "\n"
      << "reduction=" << fmt(r.reduction) << "\n"
      << "compressed_bytes=" << fmt(r.compressed_bytes) << "\n"
      << "baseline_bytes=" << fmt(r.baseline_bytes) << "\n";
}

/// Writes to `path`, or to `fallback` when no path was given.
template <typename Emit>
void emit_to(const std::optional<std::string>& path, std::ostream& fallback, Emit&& emit) {
  if (!path) {
    emit(fallback);
    return;
  }
  std::ofstream f(*path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + *path + " for writing");
  emit(f);
  if (!f) throw IoError("error while writing " + *path);
}

// ---------------------------------------------------------------------------

int cmd_gen(const Overrides& o, const std::string& out_dir, std::ostream& out) {
  const auto cfg = o.resolve();
  const auto stream = generate_synthetic_stream(cfg.d, cfg.n, parse_distribution(cfg.dist), cfg.seed, cfg.factor);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
  const fs::path dir(out_dir);
  write_tensor(dir / "keys.qjlt", stream.keys);
  write_tensor(dir / "values.qjlt", stream.values);
  write_tensor(dir / "queries.qjlt", stream.queries);
  out << "wrote " << cfg.n << "x" << cfg.d << " keys, values, queries to " << dir.string() << "\n";
  if (!stream.planted_channels.empty()) {
    out << "planted_channels=";
    for (std::size_t i = 0; i < stream.planted_channels.size(); ++i) {
      out << (i ? "," : "") << stream.planted_channels[i];
    }
    out << "\n";
  }
  return kOk;
}

int cmd_quantize(const Overrides& o, const std::string& keys_path, const std::string& values_path,
                 std::optional<std::size_t> prompt, const std::string& out_path, std::ostream& out) {
  auto cfg = o.resolve();
  const auto keys = read_tensor(keys_path);
  const auto values = read_tensor(values_path);
  if (keys.rows() == 0) throw InvalidArgument("quantize: key file holds no tokens");
  if (keys.rows() != values.rows() || keys.cols() != values.cols()) {
    throw InvalidArgument("quantize: keys are " + std::to_string(keys.rows()) + "x" + std::to_string(keys.cols()) +
                          " but values are " + std::to_string(values.rows()) + "x" + std::to_string(values.cols()));
  }
  if (o.d && *o.d != keys.cols()) {
    throw InvalidArgument("quantize: --d " + std::to_string(*o.d) + " does not match file dimension " +
                          std::to_string(keys.cols()));
  }
  cfg.d = keys.cols();
  if (prompt) cfg.prompt = *prompt;
  cfg.validate();

  const auto profile = detect_outliers(head_rows(keys, cfg.prompt), cfg.outliers);
  KeyCacheConfig kc{cfg.d, cfg.outliers, cfg.m_in, cfg.effective_m_out(), cfg.seed, cfg.orthogonalize};
  KeyCacheState cache(kc, profile);
  std::vector<QuantizedValueToken> tokens;
  tokens.reserve(values.rows());
  for (std::size_t i = 0; i < keys.rows(); ++i) {
    cache.append(keys.row(i));
    tokens.push_back(quantize_value(values.row(i), cfg.bits));
  }
  write_cache(out_path, cache, tokens);

  out << "cache=" << out_path << "\n";
  out << "outlier_channels=";
  for (std::size_t i = 0; i < profile.outlier_channels.size(); ++i) out << (i ? "," : "") << profile.outlier_channels[i];
  out << "\n";
  print_memory_report(out, memory_report(cache, cfg.bits, cfg.norm_bits, cfg.zero_scale_bits));
  return kOk;
}

int cmd_decode(const Overrides& o, const std::string& cache_path, const std::string& queries_path,
               const std::optional<std::string>& keys_path, const std::optional<std::string>& values_path,
               const std::optional<std::string>& out_path, const std::optional<std::string>& report_path,
               std::ostream& out) {
  const auto cfg = o.resolve();
  if (keys_path.has_value() != values_path.has_value()) {
    throw InvalidArgument("decode: --keys and --values must be given together");
  }
  const auto cache = read_cache(cache_path);
  const auto queries = read_tensor(queries_path);
  const std::size_t d = cache.keys.dim();
  if (queries.cols() != d) {
    throw InvalidArgument("decode: queries have dimension " + std::to_string(queries.cols()) + ", cache has " +
                          std::to_string(d));
  }
  std::optional<Matrix> exact_keys;
  std::optional<Matrix> exact_values;
  if (keys_path) {
    exact_keys = read_tensor(*keys_path);
    exact_values = read_tensor(*values_path);
    const std::size_t n = cache.keys.size();
    if (exact_keys->rows() != n || exact_values->rows() != n) {
      throw InvalidState("decode: cache holds " + std::to_string(n) + " tokens but exact files hold " +
                         std::to_string(exact_keys->rows()) + " keys and " + std::to_string(exact_values->rows()) +
                         " values");
    }
    if (exact_keys->cols() != d || exact_values->cols() != d) {
      throw InvalidArgument("decode: exact key/value dimension does not match the cache");
    }
  }

  Matrix outputs(queries.rows(), d);
  std::ostringstream csv;
  csv << "query,output_l2";
  if (exact_keys) csv << ",max_rel_score_err,tv_distance,rel_l2_err";
  csv << "\n";
  for (std::size_t qi = 0; qi < queries.rows(); ++qi) {
    const auto q = queries.row(qi);
    const auto approx = quantized_decode(q, cache.keys, cache.values, cfg.temperature, cfg.threads);
    std::copy(approx.output.begin(), approx.output.end(), outputs.row(qi).begin());
    double norm = 0.0;
    for (double v : approx.output) norm += v * v;
    csv << qi << "," << fmt(std::sqrt(norm));
    if (exact_keys) {
      const auto exact = exact_decode(q, *exact_keys, *exact_values, cfg.temperature, cfg.threads);
      const auto m = error_metrics(exact, approx);
      csv << "," << fmt(m.max_rel_score_error) << "," << fmt(m.tv_distance) << "," << fmt(m.rel_l2_error);
    }
    csv << "\n";
  }
  if (out_path) write_tensor(*out_path, outputs, DType::Float64);
  emit_to(report_path, out, [&](std::ostream& s) { s << csv.str(); });
  return kOk;
}

void write_reports(std::ostream& s, const std::vector<TrialReport>& reports, bool json) {
  if (json) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
      nlohmann::ordered_json row = nlohmann::ordered_json::object();
      for (const auto& [k, v] : r.record()) row[k] = v;
      arr.push_back(row);
    }
    s << arr.dump(2) << "\n";
    return;
  }
  const auto keys = TrialReport::record_keys();
  for (std::size_t i = 0; i < keys.size(); ++i) s << (i ? "," : "") << keys[i];
  s << "\n";
  for (const auto& r : reports) {
    const auto rec = r.record();
    for (std::size_t i = 0; i < rec.size(); ++i) s << (i ? "," : "") << rec[i].second;
    s << "\n";
  }
}

int cmd_validate(const Overrides& o, std::vector<std::string> only, std::optional<std::size_t> trial_m,
                 const std::optional<std::string>& out_path, std::ostream& out, std::ostream& err) {
  auto cfg = o.resolve();
  if (trial_m) cfg.trial_m = *trial_m;
  static const std::vector<std::string> kSuites{"unbiasedness", "distortion", "scores", "orthogonal"};
  for (const auto& s : only) {
    if (std::find(kSuites.begin(), kSuites.end(), s) == kSuites.end()) {
      throw InvalidArgument("--only: unknown suite '" + s + "'");
    }
  }
  const auto wanted = [&](const std::string& s) {
    return only.empty() || std::find(only.begin(), only.end(), s) != only.end();
  };

  TrialConfig base;
  base.dim = cfg.trial_dim;
  base.epsilon = cfg.epsilon;
  base.delta = cfg.delta;
  base.distribution = parse_distribution(cfg.dist);
  base.orthogonalize = cfg.orthogonalize;
  base.outlier_factor = cfg.factor;
  base.threads = cfg.threads;

  std::vector<TrialReport> reports;
  if (wanted("unbiasedness")) {
    auto t = base;
    t.sketch_dim = cfg.unbiasedness_m;
    t.trials = cfg.unbiasedness_trials;
    t.seed = derive_seed(cfg.seed, kUnbiasednessStream);
    reports.push_back(run_unbiasedness_trial(t));
  }
  if (wanted("distortion")) {
    auto t = base;
    t.sketch_dim = cfg.trial_m != 0 ? cfg.trial_m : required_m(cfg.epsilon, cfg.delta);
    t.trials = cfg.distortion_trials;
    t.seed = derive_seed(cfg.seed, kDistortionStream);
    reports.push_back(run_distortion_trial(t));
  }
  if (wanted("scores")) {
    // The score bound assumes unit-norm keys and query (r = 1).
    auto t = base;
    t.distribution = Distribution::Sphere;
    t.tokens = cfg.score_tokens;
    t.sketch_dim = cfg.trial_m != 0 ? cfg.trial_m : required_m_scores(cfg.epsilon, 1.0, cfg.score_tokens);
    t.trials = cfg.score_draws;
    t.seed = derive_seed(cfg.seed, kScoreStream);
    reports.push_back(run_score_trial(t));
  }
  if (wanted("orthogonal")) {
    auto t = base;
    t.sketch_dim = cfg.orthogonal_m;
    t.trials = cfg.orthogonal_trials;
    t.seed = derive_seed(cfg.seed, kOrthogonalStream);
    reports.push_back(run_orthogonal_comparison(t));
  }

  bool all_passed = true;
  for (const auto& r : reports) {
    all_passed = all_passed && r.passed;
    err << (r.passed ? "[PASS] " : "[FAIL] ") << r.suite << " m=" << r.sketch_dim << " trials=" << r.trials;
    if (r.z_score) err << " z=" << fmt(*r.z_score);
    if (r.suite == "distortion" && r.failure_fraction) err << " failure_fraction=" << fmt(*r.failure_fraction);
    if (r.pass_fraction) err << " pass_fraction=" << fmt(*r.pass_fraction);
    if (r.variance_ratio) err << " variance_ratio=" << fmt(*r.variance_ratio);
    if (r.threshold) err << " threshold=" << fmt(*r.threshold);
    err << "\n";
  }
  const bool json = out_path && fs::path(*out_path).extension() == ".json";
  emit_to(out_path, out, [&](std::ostream& s) { write_reports(s, reports, json); });
  return all_passed ? kOk : kAssertionFailed;
}

int cmd_bench(const Overrides& o, std::optional<std::vector<std::size_t>> lengths,
              std::optional<std::size_t> repeats, std::size_t evict_mb, const std::optional<std::string>& out_path,
              std::ostream& out) {
  const auto cfg = o.resolve();
  BenchOptions opts;
  opts.lengths = lengths ? *lengths : cfg.bench_lengths;
  opts.dim = cfg.d;
  opts.m_in = cfg.m_in;
  opts.m_out = cfg.effective_m_out();
  opts.outliers = cfg.outliers;
  opts.bits = cfg.bits;
  opts.seed = cfg.seed;
  opts.repeats = repeats ? *repeats : cfg.bench_repeats;
  opts.threads = cfg.threads;
  opts.evict_bytes = evict_mb << 20;
  const auto rows = run_decode_benchmark(opts);
  std::optional<double> exact_slope;
  std::optional<double> quant_slope;
  if (opts.lengths.size() >= 2) {
    exact_slope = loglog_slope(rows, "exact");
    quant_slope = loglog_slope(rows, "quantized");
  }
  emit_to(out_path, out, [&](std::ostream& s) {
    s << "path,n,d,threads,repeats,median_us,loglog_slope\n";
    for (const auto& r : rows) {
      const auto& slope = r.path == "exact" ? exact_slope : quant_slope;
      s << r.path << "," << r.n << "," << r.dim << "," << r.threads << "," << r.repeats << "," << fmt(r.median_us)
        << "," << (slope ? fmt(*slope) : "") << "\n";
    }
  });
  return kOk;
}

int cmd_config(const Overrides& o, const std::optional<std::string>& out_path, std::ostream& out) {
  const auto cfg = o.resolve();
  if (out_path) {
    save_run_config(*out_path, cfg);
  } else {
    out << to_json_text(cfg);
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"QJL: 1-bit Johnson-Lindenstrauss KV cache quantization toolkit", "qjl"};
  app.require_subcommand(1);

  Overrides gen_o, quant_o, dec_o, val_o, bench_o, cfg_o;

  auto* gen = app.add_subcommand("gen", "write synthetic keys/values/queries tensors");
  gen_o.attach(gen);
  std::string gen_out = ".";
  gen->add_option("--out", gen_out, "output directory");

  auto* quant = app.add_subcommand("quantize", "quantize keys/values into a QJLC cache file");
  quant_o.attach(quant);
  std::string q_keys, q_values, q_out;
  std::optional<std::size_t> q_prompt;
  quant->add_option("--keys", q_keys, "QJLT key tensor")->required();
  quant->add_option("--values", q_values, "QJLT value tensor")->required();
  quant->add_option("--prompt", q_prompt, "prompt tokens used for outlier detection");
  quant->add_option("--out", q_out, "output QJLC cache")->required();

  auto* dec = app.add_subcommand("decode", "attention decoding against a QJLC cache");
  dec_o.attach(dec);
  std::string d_cache, d_queries;
  std::optional<std::string> d_keys, d_values, d_out, d_report;
  dec->add_option("--cache", d_cache, "QJLC cache")->required();
  dec->add_option("--queries", d_queries, "QJLT query tensor")->required();
  dec->add_option("--keys", d_keys, "exact keys (enables error columns)");
  dec->add_option("--values", d_values, "exact values (enables error columns)");
  dec->add_option("--out", d_out, "write attention outputs as a QJLT tensor");
  dec->add_option("--report", d_report, "CSV report path (default stdout)");

  auto* val = app.add_subcommand("validate", "run the statistical validation suites");
  val_o.attach(val);
  std::vector<std::string> v_only;
  std::optional<std::size_t> v_m;
  std::optional<std::string> v_out;
  val->add_option("--only", v_only, "suites to run: unbiasedness, distortion, scores, orthogonal");
  val->add_option("--m", v_m, "sketch dimension for the distortion and score suites");
  val->add_option("--out", v_out, "report path; .json selects JSON, anything else CSV (default stdout)");

  auto* bench = app.add_subcommand("bench", "time exact vs quantized decoding");
  bench_o.attach(bench);
  std::optional<std::vector<std::size_t>> b_lengths;
  std::optional<std::size_t> b_repeats;
  std::optional<std::string> b_out;
  std::size_t b_evict_mb = 0;
  bench->add_option("--lengths", b_lengths, "sequence lengths")->delimiter(',');
  bench->add_option("--repeats", b_repeats, "timing samples per point (median reported)");
  bench->add_option("--evict-mb", b_evict_mb, "sweep this many MiB before each timed step (cold-cache timing)");
  bench->add_option("--out", b_out, "CSV path (default stdout)");

  auto* conf = app.add_subcommand("config", "print or write the resolved run config");
  cfg_o.attach(conf);
  std::optional<std::string> c_out;
  conf->add_option("--out", c_out, "write the config here instead of stdout");

  std::vector<const char*> argv{"qjl"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_o, gen_out, out);
    if (quant->parsed()) return cmd_quantize(quant_o, q_keys, q_values, q_prompt, q_out, out);
    if (dec->parsed()) return cmd_decode(dec_o, d_cache, d_queries, d_keys, d_values, d_out, d_report, out);
    if (val->parsed()) return cmd_validate(val_o, v_only, v_m, v_out, out, err);
    if (bench->parsed()) return cmd_bench(bench_o, b_lengths, b_repeats, b_evict_mb, b_out, out);
    if (conf->parsed()) return cmd_config(cfg_o, c_out, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InvalidState& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kInternalError;
}

}  // namespace qjl::cli
