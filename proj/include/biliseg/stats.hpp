#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "biliseg/errors.hpp"

namespace biliseg {

inline constexpr double significance_level = 0.05;

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Arithmetic mean and sample (N-1) standard deviation.
inline MeanStd mean_std(std::span<const double> samples) {
  if (samples.size() < 2)
    throw degenerate_input_error("mean/std needs at least 2 samples, got " +
                                 std::to_string(samples.size()));
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mean = sum / static_cast<double>(samples.size());
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(samples.size() - 1))};
}

namespace detail {

// Continued fraction for the incomplete beta function, modified Lentz.
inline double beta_cf(double x, double a, double b) {
  constexpr int max_iter = 10000;
  constexpr double eps = 1e-16;
  constexpr double tiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  throw domain_error("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double reg_inc_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0) || !(a > 0.0) || !(b > 0.0) || !std::isfinite(a) ||
      !std::isfinite(b))
    throw domain_error("reg_inc_beta requires 0 <= x <= 1, a > 0, b > 0");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast below the mean of the distribution; use the
  // symmetry I_x(a,b) = 1 - I_{1-x}(b,a) above it.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(x, a, b) / a;
  return 1.0 - front * detail::beta_cf(1.0 - x, b, a) / b;
}

/// Upper tail P(F' >= f) of the F distribution with (d1, d2) degrees of
/// freedom.
inline double f_distribution_sf(double f, double d1, double d2) {
  if (!(f >= 0.0)) throw domain_error("F statistic must be non-negative");
  if (f == std::numeric_limits<double>::infinity()) return 0.0;
  // 1 - I_{d1 f/(d1 f + d2)}(d1/2, d2/2), rewritten without the subtraction.
  return reg_inc_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0);
}

struct AnovaResult {
  double f_stat = 0.0;
  std::size_t df_between = 0;
  std::size_t df_within = 0;
  double p_value = 1.0;
  bool significant = false;
};

inline bool is_significant(double p) { return p < significance_level; }

inline AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2)
    throw config_error("one-way ANOVA needs at least 2 groups, got " +
                       std::to_string(groups.size()));
  std::size_t n = 0;
  double total = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw config_error("every ANOVA group needs at least 2 samples");
    n += g.size();
    for (double v : g) total += v;
  }
  const double grand = total / static_cast<double>(n);
  double ssb = 0.0, ssw = 0.0;
  for (const auto& g : groups) {
    double s = 0.0;
    for (double v : g) s += v;
    const double m = s / static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double v : g) ssw += (v - m) * (v - m);
  }
  if (ssw == 0.0)
    throw degenerate_input_error("within-group sum of squares is zero; F is undefined");

  AnovaResult r;
  r.df_between = groups.size() - 1;
  r.df_within = n - groups.size();
  r.f_stat = (ssb / static_cast<double>(r.df_between)) / (ssw / static_cast<double>(r.df_within));
  r.p_value = f_distribution_sf(r.f_stat, static_cast<double>(r.df_between),
                                static_cast<double>(r.df_within));
  r.significant = is_significant(r.p_value);
  return r;
}

}  // namespace biliseg
