#include "acfclust/stats.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "acfclust/error.hpp"

namespace acfclust {

DeltaStats delta_stats(std::span<const double> values) {
  require(values.size() >= 2, ErrorKind::InsufficientData,
          fmt::format("delta_stats needs >= 2 values (got {})", values.size()));
  double sum = 0.0;
  for (double v : values) {
    require(std::isfinite(v), ErrorKind::Domain, "delta_stats: non-finite value");
    sum += v;
  }
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0)), values.size()};
}

namespace {

// Continued fraction for I_x(a,b) by the modified Lentz method.
double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  fail(ErrorKind::Domain, "incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, ErrorKind::Domain, "incomplete_beta: a, b must be > 0");
  require(x >= 0.0 && x <= 1.0, ErrorKind::Domain, "incomplete_beta: x outside [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double lbt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                     b * std::log1p(-x);
  const double bt = std::exp(lbt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  require(df > 0.0, ErrorKind::Domain, "student_t_cdf: df must be > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

PairedTResult paired_t_test(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::Precondition, "paired_t_test: lengths differ");
  require(x.size() >= 2, ErrorKind::InsufficientData, "paired_t_test needs >= 2 pairs");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  const DeltaStats s = delta_stats(d);
  PairedTResult r;
  r.df = x.size() - 1;
  if (s.stdev == 0.0) {
    if (s.mean == 0.0) return r;
    fail(ErrorKind::InfiniteT,
         fmt::format("paired_t_test: differences are constant ({}), t is infinite", s.mean));
  }
  r.t = s.mean / (s.stdev / std::sqrt(static_cast<double>(s.n)));
  const double x_beta = static_cast<double>(r.df) / (static_cast<double>(r.df) + r.t * r.t);
  r.p_two_sided = incomplete_beta(0.5 * static_cast<double>(r.df), 0.5, x_beta);
  return r;
}

}  // namespace acfclust
