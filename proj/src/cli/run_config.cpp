#include "qjl/run_config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "qjl/error.hpp"

namespace qjl {

namespace {

using Json = nlohmann::ordered_json;

template <typename Visitor>
void visit_fields(RunConfig& c, Visitor&& v) {
  v("d", c.d);
  v("n", c.n);
  v("m_in", c.m_in);
  v("m_out", c.m_out);
  v("outliers", c.outliers);
  v("bits", c.bits);
  v("seed", c.seed);
  v("temperature", c.temperature);
  v("orthogonalize", c.orthogonalize);
  v("prompt", c.prompt);
  v("norm_bits", c.norm_bits);
  v("zero_scale_bits", c.zero_scale_bits);
  v("dist", c.dist);
  v("factor", c.factor);
  v("epsilon", c.epsilon);
  v("delta", c.delta);
  v("trial_dim", c.trial_dim);
  v("trial_m", c.trial_m);
  v("unbiasedness_m", c.unbiasedness_m);
  v("unbiasedness_trials", c.unbiasedness_trials);
  v("distortion_trials", c.distortion_trials);
  v("score_tokens", c.score_tokens);
  v("score_draws", c.score_draws);
  v("orthogonal_m", c.orthogonal_m);
  v("orthogonal_trials", c.orthogonal_trials);
  v("bench_lengths", c.bench_lengths);
  v("bench_repeats", c.bench_repeats);
  v("threads", c.threads);
}

template <typename T>
void read_field(const Json& j, const std::string& key, T& out) {
  const auto fail = [&](const char* expected) {
    throw InvalidArgument("config field '" + key + "' must be " + expected);
  };
  if constexpr (std::is_same_v<T, bool>) {
    if (!j.is_boolean()) fail("a boolean");
    out = j.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!j.is_string()) fail("a string");
    out = j.get<std::string>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!j.is_number()) fail("a number");
    out = j.get<T>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!j.is_number_unsigned()) fail("a non-negative integer");
    const auto v = j.get<std::uint64_t>();
    if (v > std::numeric_limits<T>::max()) fail("a smaller integer");
    out = static_cast<T>(v);
  } else {
    if (!j.is_array()) fail("an array of non-negative integers");
    out.clear();
    for (const auto& e : j) {
      if (!e.is_number_unsigned()) fail("an array of non-negative integers");
      out.push_back(e.get<std::size_t>());
    }
  }
}

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw InvalidArgument("config field '" + field + "' " + why);
  };
  if (d == 0) fail("d", "must be positive");
  if (n == 0) fail("n", "must be positive");
  if (outliers > d) fail("outliers", "cannot exceed d");
  if (bits < 1 || bits > 8) fail("bits", "must lie in [1, 8]");
  if (!(temperature > 0.0)) fail("temperature", "must be positive");
  if (prompt == 0) fail("prompt", "must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0)) fail("epsilon", "must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) fail("delta", "must lie in (0, 1)");
  if (!(factor > 0.0)) fail("factor", "must be positive");
  if (dist != "sphere" && dist != "gaussian" && dist != "outlier") fail("dist", "must be sphere, gaussian or outlier");
  if (trial_dim == 0) fail("trial_dim", "must be positive");
  if (unbiasedness_m == 0) fail("unbiasedness_m", "must be positive");
  if (orthogonal_m == 0) fail("orthogonal_m", "must be positive");
  if (score_tokens < 2) fail("score_tokens", "must be at least 2");
  for (auto [name, value] : {std::pair{"unbiasedness_trials", unbiasedness_trials},
                             std::pair{"distortion_trials", distortion_trials},
                             std::pair{"score_draws", score_draws}, std::pair{"orthogonal_trials", orthogonal_trials}}) {
    if (value < 100) fail(name, "must be at least 100");
  }
  if (bench_repeats == 0) fail("bench_repeats", "must be positive");
  for (auto len : bench_lengths) {
    if (len == 0) fail("bench_lengths", "entries must be positive");
  }
}

std::string to_json_text(const RunConfig& cfg) {
  Json j = Json::object();
  auto copy = cfg;
  visit_fields(copy, [&](const char* key, const auto& value) { j[key] = value; });
  return j.dump(2) + "\n";
}

RunConfig parse_run_config(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  RunConfig cfg;
  std::size_t matched = 0;
  visit_fields(cfg, [&](const char* key, auto& value) {
    if (auto it = j.find(key); it != j.end()) {
      read_field(*it, key, value);
      ++matched;
    }
  });
  if (matched != j.size()) {
    RunConfig probe;
    for (const auto& [key, _] : j.items()) {
      bool known = false;
      visit_fields(probe, [&](const char* name, auto&) { known = known || key == name; });
      if (!known) throw InvalidArgument("unknown config field '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

void save_run_config(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << to_json_text(cfg);
  if (!out) throw IoError("error while writing " + path.string());
}

}  // namespace qjl
