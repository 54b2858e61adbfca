#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "acfclust/error.hpp"
#include "acfclust/volgrid.hpp"

namespace acfclust {

// Mixed-model spatial autocorrelation
//   rho(r) = a*exp(-r^2 / (2 b^2)) + (1 - a)*exp(-r / c)
// with 0 <= a <= 1 and b, c > 0 (mm).
struct AcfParams {
  double a = 0.5;
  double b = 1.0;
  double c = 1.0;

  friend bool operator==(const AcfParams&, const AcfParams&) = default;
};

bool is_valid(const AcfParams& p) noexcept;
void validate(const AcfParams& p);

double acf_eval(const AcfParams& p, double r_mm);
// d rho / d(a, b, c) at r.
std::array<double, 3> acf_gradient(const AcfParams& p, double r_mm);

// Radius at which rho falls to 1/2; the FWHM of the ACF is twice this.
double acf_half_width(const AcfParams& p);

struct AcfBin {
  double radius_mm = 0.0;    // pair-count weighted mean distance of the bin
  double mean_corr = 0.0;
  std::uint64_t pair_count = 0;
  bool fit = true;           // false for the r = 0 bin
};

struct AcfSample {
  std::vector<AcfBin> bins;
  std::size_t used_voxels = 0;
  std::size_t excluded_voxels = 0;  // zero-variance voxels left out of every pair

  std::size_t fitting_bin_count() const noexcept;
};

enum class PairMethod { Auto, Direct, Fft };

struct SampleOptions {
  double r_max_mm = 20.0;
  std::optional<double> bin_width_mm;  // default: min voxel spacing
  PairMethod method = PairMethod::Auto;
};

// Empirical correlation vs distance. Each in-mask voxel series is demeaned
// and scaled to unit norm (a single frame is normalized globally instead);
// the dot products of every voxel pair whose offset is within r_max are
// accumulated into distance bins of width bin_width centered on multiples of
// bin_width. The direct and FFT pair routes compute the same sums.
AcfSample sample_acf(const Series4D& series, const Mask& mask, const SampleOptions& opts = {});

struct FitOptions {
  int max_iterations = 200;
  double rel_tol = 1e-10;
  // Starting scale for b and c; when absent it is read off the sample curve.
  std::optional<double> fwhm_hint_mm;
};

struct AcfFit {
  AcfParams params;
  double objective = 0.0;  // weighted SSE with weights normalized to sum 1
  int iterations = 0;
  int restart = 0;
};

// Thrown when no restart converged; carries the best parameters seen.
class FitFailure : public Error {
 public:
  FitFailure(const std::string& what, AcfParams best, double objective)
      : Error(ErrorKind::FitFailure, what), best_(best), objective_(objective) {}
  const AcfParams& best() const noexcept { return best_; }
  double objective() const noexcept { return objective_; }

 private:
  AcfParams best_;
  double objective_;
};

// Weighted (pair-count) nonlinear least squares of the mixed model against the
// fitting bins, by damped Gauss-Newton on (logit a, log b, log c) with five
// deterministic restarts.
AcfFit fit_acf(const AcfSample& sample, const FitOptions& opts = {});

enum class AcfModel { Mixed, Gaussian };

struct FwhmEstimate {
  double fwhm_mm = 0.0;
  AcfModel model = AcfModel::Mixed;
  std::optional<AcfParams> params;
  // Classic estimator only.
  std::array<double, 3> axis_fwhm_mm{};
  std::array<bool, 3> axis_valid{true, true, true};
  bool warning = false;
};

FwhmEstimate fwhm_from_acf(const AcfParams& p);

// Lag-one Gaussian estimator: rho_k = 1 - var(first differences)/(2 var),
// FWHM_k = 2 sqrt(2 ln 2) d_k / sqrt(-2 ln rho_k), combined by geometric mean.
FwhmEstimate gaussian_fwhm_classic(const Series4D& series, const Mask& mask);

void write_acf_sample_csv(std::ostream& os, const AcfSample& sample);
void write_acf_params_csv(std::ostream& os, const AcfParams& p, double fwhm_mm);

}  // namespace acfclust
