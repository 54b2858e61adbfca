#include "acfclust/synth.hpp"

#include <cmath>

#include "acfclust/simd.hpp"
#include "fft.hpp"

namespace acfclust {

namespace {

// Periodic distance (in voxels) along an axis of length n.
inline int wrap(int i, int n) { return std::min(i, n - i); }

std::vector<double> rescale_unit_variance(std::span<const double> raw) {
  const auto m = simd::moments(raw);
  const double n = static_cast<double>(raw.size());
  const double mean = m.sum / n;
  const double var = std::max(m.sumsq / n - mean * mean, 0.0) * n / std::max(n - 1.0, 1.0);
  const double inv_sd = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] * inv_sd;
  return out;
}

}  // namespace

SynthPlan build_plan(const VolumeGrid& grid, const AcfParams& params) {
  validate(params);
  const double fwhm = fwhm_from_acf(params).fwhm_mm;
  SynthPlan plan{grid, params, 2.0 * fwhm, {}, nullptr, 0.0, false};
  for (int a = 0; a < 3; ++a) {
    const int pad_vox = static_cast<int>(std::ceil(plan.pad_mm / grid.spacing()[a]));
    plan.padded_dims[a] = fft::good_size(grid.dims()[a] + 2 * pad_vox);
  }
  const Index3& pd = plan.padded_dims;
  const std::size_t n = plan.padded_size();
  const std::size_t nhalf = fft::half_spectrum_size(pd);

  fft::Buffer<double> table(n);
  const auto& d = grid.spacing();
  for (int k = 0; k < pd[2]; ++k)
    for (int j = 0; j < pd[1]; ++j)
      for (int i = 0; i < pd[0]; ++i) {
        const double x = wrap(i, pd[0]) * d[0];
        const double y = wrap(j, pd[1]) * d[1];
        const double z = wrap(k, pd[2]) * d[2];
        table[(static_cast<std::size_t>(k) * pd[1] + j) * pd[0] + i] =
            acf_eval(params, std::sqrt(x * x + y * y + z * z));
      }
  fft::Buffer<std::complex<double>> spectrum(nhalf);
  fft::forward_r2c(pd, table.data(), spectrum.data());

  // Expand the half spectrum to every bin; the table is real and even, so
  // the spectrum is real and S(k) = S(-k).
  const int hx = pd[0] / 2 + 1;
  auto filter = std::make_shared<std::vector<float>>(n);
  double neg = 0.0, total = 0.0;
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < pd[2]; ++k)
    for (int j = 0; j < pd[1]; ++j)
      for (int i = 0; i < pd[0]; ++i) {
        double s;
        if (i < hx) {
          s = spectrum[(static_cast<std::size_t>(k) * pd[1] + j) * hx + i].real();
        } else {
          const int ci = pd[0] - i, cj = (pd[1] - j) % pd[1], ck = (pd[2] - k) % pd[2];
          s = spectrum[(static_cast<std::size_t>(ck) * pd[1] + cj) * hx + ci].real();
        }
        total += std::fabs(s);
        if (s < 0.0) {
          neg += -s;
          s = 0.0;
        }
        (*filter)[(static_cast<std::size_t>(k) * pd[1] + j) * pd[0] + i] =
            static_cast<float>(std::sqrt(s) * inv_sqrt_n);
      }
  plan.filter = std::move(filter);
  plan.clipped_fraction = total > 0.0 ? neg / total : 0.0;
  plan.ill_conditioned = plan.clipped_fraction > 0.01;
  return plan;
}

void synthesize_raw_pair(const SynthPlan& plan, std::uint64_t seed, std::span<double> first,
                         std::span<double> second) {
  const Index3& pd = plan.padded_dims;
  const std::size_t n = plan.padded_size();
  fft::Buffer<std::complex<float>> buf(n);
  simd::normal_complex(seed, 0, 0, buf.span());
  simd::scale_complex(buf.span(), *plan.filter);
  fft::inverse_c2c(pd, buf.data());

  const VolumeGrid& g = plan.grid;
  for (int k = 0; k < g.nz(); ++k)
    for (int j = 0; j < g.ny(); ++j) {
      const std::size_t src = (static_cast<std::size_t>(k) * pd[1] + j) * pd[0];
      const std::size_t dst = g.index(0, j, k);
      for (int i = 0; i < g.nx(); ++i) {
        first[dst + i] = buf[src + i].real();
        second[dst + i] = buf[src + i].imag();
      }
    }
}

std::pair<ScalarField, ScalarField> synthesize_pair(const SynthPlan& plan, std::uint64_t seed) {
  std::vector<double> a(plan.grid.size());
  std::vector<double> b(plan.grid.size());
  synthesize_raw_pair(plan, seed, a, b);
  return {ScalarField(plan.grid, rescale_unit_variance(a)),
          ScalarField(plan.grid, rescale_unit_variance(b))};
}

ScalarField synthesize_field(const SynthPlan& plan, std::uint64_t seed) {
  return synthesize_pair(plan, seed).first;
}

}  // namespace acfclust
