#pragma once

#include <cstddef>
#include <span>

namespace acfclust {

struct DeltaStats {
  double mean = 0.0;
  double stdev = 0.0;  // n - 1 denominator
  std::size_t n = 0;
};

DeltaStats delta_stats(std::span<const double> values);

struct PairedTResult {
  double t = 0.0;
  std::size_t df = 0;
  double p_two_sided = 1.0;
};

// Paired t-test on d = x - y. Zero-variance differences give t = 0, p = 1 when
// their mean is zero and an InfiniteT error otherwise.
PairedTResult paired_t_test(std::span<const double> x, std::span<const double> y);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// P(T <= t) for Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);

}  // namespace acfclust
