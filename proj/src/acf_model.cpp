#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "acfclust/acf.hpp"

namespace acfclust {

bool is_valid(const AcfParams& p) noexcept {
  return std::isfinite(p.a) && std::isfinite(p.b) && std::isfinite(p.c) && p.a >= 0.0 &&
         p.a <= 1.0 && p.b > 0.0 && p.c > 0.0;
}

void validate(const AcfParams& p) {
  if (!is_valid(p)) {
    fail(ErrorKind::Precondition,
         fmt::format("ACF parameters need 0 <= a <= 1, b > 0, c > 0 (got a={}, b={}, c={})", p.a,
                     p.b, p.c));
  }
}

double acf_eval(const AcfParams& p, double r_mm) {
  require(r_mm >= 0.0, ErrorKind::Domain, "acf_eval: distance must be >= 0");
  return p.a * std::exp(-r_mm * r_mm / (2.0 * p.b * p.b)) + (1.0 - p.a) * std::exp(-r_mm / p.c);
}

std::array<double, 3> acf_gradient(const AcfParams& p, double r_mm) {
  require(r_mm >= 0.0, ErrorKind::Domain, "acf_gradient: distance must be >= 0");
  const double g = std::exp(-r_mm * r_mm / (2.0 * p.b * p.b));
  const double e = std::exp(-r_mm / p.c);
  return {g - e, p.a * g * r_mm * r_mm / (p.b * p.b * p.b), (1.0 - p.a) * e * r_mm / (p.c * p.c)};
}

double acf_half_width(const AcfParams& p) {
  validate(p);
  double lo = 0.0;
  double hi = std::max(p.b, p.c);
  while (acf_eval(p, hi) > 0.5) {
    lo = hi;
    hi *= 2.0;
  }
  // rho is strictly decreasing, so the bracket [lo, hi] holds the unique root.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = acf_eval(p, mid) - 0.5;
    if (std::fabs(v) < 1e-12 || mid == lo || mid == hi) return mid;
    (v > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

FwhmEstimate fwhm_from_acf(const AcfParams& p) {
  FwhmEstimate est;
  est.fwhm_mm = 2.0 * acf_half_width(p);
  est.model = AcfModel::Mixed;
  est.params = p;
  return est;
}

std::size_t AcfSample::fitting_bin_count() const noexcept {
  std::size_t n = 0;
  for (const auto& b : bins) n += (b.fit && b.pair_count > 0) ? 1 : 0;
  return n;
}

void write_acf_sample_csv(std::ostream& os, const AcfSample& sample) {
  os << "radius_mm,mean_corr,pair_count,fit\n";
  for (const auto& b : sample.bins) {
    fmt::print(os, "{},{},{},{}\n", b.radius_mm, b.mean_corr, b.pair_count, b.fit ? 1 : 0);
  }
}

void write_acf_params_csv(std::ostream& os, const AcfParams& p, double fwhm_mm) {
  os << "a,b,c,fwhm\n";
  fmt::print(os, "{},{},{},{}\n", p.a, p.b, p.c, fwhm_mm);
}

}  // namespace acfclust
