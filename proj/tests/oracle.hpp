// Independent reference implementations used only by the tests. They share no
// code with the library beyond the public data types.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "qjl/matrix.hpp"
#include "qjl/sketch.hpp"

namespace oracle {

inline std::vector<double> random_vector(std::mt19937_64& gen, std::size_t d) {
  std::normal_distribution<double> nd;
  std::vector<double> v(d);
  for (auto& x : v) x = nd(gen);
  return v;
}

inline std::vector<double> random_unit(std::mt19937_64& gen, std::size_t d) {
  auto v = random_vector(gen, d);
  long double s = 0;
  for (double x : v) s += static_cast<long double>(x) * x;
  const double n = static_cast<double>(std::sqrt(s));
  for (auto& x : v) x /= n;
  return v;
}

inline long double dot(std::span<const double> a, std::span<const double> b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return s;
}

inline long double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Row-by-row matvec in long double.
inline std::vector<long double> matvec(const qjl::SketchMatrix& s, std::span<const double> x) {
  std::vector<long double> out(s.rows());
  for (std::size_t i = 0; i < s.rows(); ++i) out[i] = dot(s.row(i), x);
  return out;
}

/// Unpacked +-1 signs of Sk with sign(0) = +1.
inline std::vector<int> signs_of(const qjl::SketchMatrix& s, std::span<const double> k) {
  std::vector<int> out;
  for (auto v : matvec(s, k)) out.push_back(v >= 0 ? 1 : -1);
  return out;
}

/// sqrt(pi/2)/m * |k| * <Sq, sign(Sk)> computed on explicit +-1 vectors.
inline long double estimate(std::span<const long double> sq, std::span<const int> signs, long double knorm) {
  if (signs.empty()) return 0;
  long double acc = 0;
  for (std::size_t i = 0; i < signs.size(); ++i) acc += sq[i] * signs[i];
  return std::sqrt(std::numbers::pi_v<long double> / 2) / signs.size() * knorm * acc;
}

inline std::vector<long double> softmax(std::span<const long double> logits, long double temperature = 1) {
  long double mx = logits[0];
  for (auto l : logits) mx = std::max(mx, l);
  std::vector<long double> w(logits.size());
  long double z = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += (w[i] = std::exp((logits[i] - mx) / temperature));
  for (auto& x : w) x /= z;
  return w;
}

/// Brute-force attention: softmax(K q / T)^T V in long double.
inline std::vector<long double> attention(std::span<const double> q, const qjl::Matrix& k, const qjl::Matrix& v,
                                          long double temperature = 1) {
  std::vector<long double> logits(k.rows());
  for (std::size_t i = 0; i < k.rows(); ++i) logits[i] = dot(q, k.row(i));
  const auto w = softmax(logits, temperature);
  std::vector<long double> out(v.cols(), 0);
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = 0; j < v.cols(); ++j) out[j] += w[i] * v(i, j);
  return out;
}

inline qjl::Matrix rows_of(const std::vector<std::vector<double>>& rows) {
  qjl::Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

}  // namespace oracle
