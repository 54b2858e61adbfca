#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "acfclust/acf.hpp"
#include "acfclust/volgrid.hpp"

namespace acfclust {

// Precomputed spectral filter for Gaussian noise with a given mixed-model ACF.
// The field lives on a periodic grid padded by at least twice the ACF FWHM
// per side; the filter is sqrt(max(DFT(rho), 0)) / sqrt(N).
struct SynthPlan {
  VolumeGrid grid;
  AcfParams params;
  double pad_mm = 0.0;
  Index3 padded_dims{};
  std::shared_ptr<const std::vector<float>> filter;
  double clipped_fraction = 0.0;  // |negative spectral mass| / total |mass|
  bool ill_conditioned = false;   // clipped_fraction > 1%

  std::size_t padded_size() const noexcept {
    return static_cast<std::size_t>(padded_dims[0]) * padded_dims[1] * padded_dims[2];
  }
};

SynthPlan build_plan(const VolumeGrid& grid, const AcfParams& params);

// Two independent realizations from one key: complex white noise is drawn
// directly in the frequency domain, shaped by the filter, and inverse
// transformed; the real and imaginary parts are independent fields that each
// carry the target covariance. Values are cropped but not rescaled.
void synthesize_raw_pair(const SynthPlan& plan, std::uint64_t seed, std::span<double> first,
                         std::span<double> second);

// Unit-sample-variance realization(s) on plan.grid.
ScalarField synthesize_field(const SynthPlan& plan, std::uint64_t seed);
std::pair<ScalarField, ScalarField> synthesize_pair(const SynthPlan& plan, std::uint64_t seed);

}  // namespace acfclust
