#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "acfclust/acf.hpp"

namespace acfclust {

namespace {

using Vec = std::array<double, 3>;
using Mat = std::array<Vec, 3>;

struct Point {
  double r;
  double y;
  double sqrt_w;
};

// Unconstrained coordinates: a = logistic(theta0), b = exp(theta1), c = exp(theta2).
constexpr double kLogitLimit = 40.0;
const double kLogScaleLo = std::log(1e-3);
const double kLogScaleHi = std::log(1e4);

AcfParams to_params(const Vec& th) {
  return {1.0 / (1.0 + std::exp(-th[0])), std::exp(th[1]), std::exp(th[2])};
}

Vec to_theta(const AcfParams& p) {
  const double a = std::clamp(p.a, 1e-6, 1.0 - 1e-6);
  return {std::log(a / (1.0 - a)), std::log(p.b), std::log(p.c)};
}

Vec clamp_theta(Vec th) {
  th[0] = std::clamp(th[0], -kLogitLimit, kLogitLimit);
  th[1] = std::clamp(th[1], kLogScaleLo, kLogScaleHi);
  th[2] = std::clamp(th[2], kLogScaleLo, kLogScaleHi);
  return th;
}

double objective(const std::vector<Point>& pts, const AcfParams& p) {
  double f = 0.0;
  for (const auto& q : pts) {
    const double e = q.sqrt_w * (q.y - acf_eval(p, q.r));
    f += e * e;
  }
  return f;
}

// Solves (A) x = rhs for a symmetric positive (semi)definite 3x3 system by
// Gaussian elimination with partial pivoting. Returns false if singular.
bool solve3(Mat a, Vec rhs, Vec& x) {
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-300) return false;
    std::swap(a[col], a[piv]);
    std::swap(rhs[col], rhs[piv]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double s = rhs[r];
    for (int c = r + 1; c < 3; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
}

struct RunResult {
  AcfParams params;
  double objective;
  int iterations;
  bool converged;
};

RunResult levenberg_marquardt(const std::vector<Point>& pts, const AcfParams& start,
                              const FitOptions& opts) {
  Vec th = clamp_theta(to_theta(start));
  AcfParams p = to_params(th);
  double f = objective(pts, p);
  double lambda = 1e-3;
  int it = 0;
  bool converged = false;
  while (it < opts.max_iterations) {
    ++it;
    // RMS residual below 1e-12 (weights sum to one).
    if (f < 1e-24) {
      converged = true;
      break;
    }
    Mat jtj{};
    Vec jte{};
    const double da = p.a * (1.0 - p.a);
    for (const auto& q : pts) {
      const auto g = acf_gradient(p, q.r);
      const Vec jrow{-q.sqrt_w * g[0] * da, -q.sqrt_w * g[1] * p.b, -q.sqrt_w * g[2] * p.c};
      const double e = q.sqrt_w * (q.y - acf_eval(p, q.r));
      for (int i = 0; i < 3; ++i) {
        jte[i] += jrow[i] * e;
        for (int j = 0; j < 3; ++j) jtj[i][j] += jrow[i] * jrow[j];
      }
    }
    bool accepted = false;
    while (!accepted && lambda < 1e16) {
      Mat aug = jtj;
      for (int i = 0; i < 3; ++i) aug[i][i] += lambda * (jtj[i][i] + 1e-12);
      Vec step{};
      if (solve3(aug, {-jte[0], -jte[1], -jte[2]}, step)) {
        const Vec trial = clamp_theta({th[0] + step[0], th[1] + step[1], th[2] + step[2]});
        const AcfParams tp = to_params(trial);
        const double ft = objective(pts, tp);
        if (ft < f) {
          const double rel = (f - ft) / f;
          th = trial;
          p = tp;
          f = ft;
          lambda = std::max(lambda * 0.1, 1e-12);
          accepted = true;
          const double move = std::max({std::fabs(step[0]), std::fabs(step[1]), std::fabs(step[2])});
          if (rel < opts.rel_tol || move < 1e-10) converged = true;
          break;
        }
      }
      lambda *= 10.0;
    }
    // No improving step at any damping: numerically at a minimum.
    if (!accepted || converged) {
      converged = true;
      break;
    }
  }
  return {p, f, it, converged};
}

double crossing_fwhm(const std::vector<Point>& pts) {
  double prev_r = 0.0, prev_y = 1.0;
  for (const auto& q : pts) {
    if (q.y < 0.5) {
      const double t = (prev_y - 0.5) / (prev_y - q.y);
      return 2.0 * (prev_r + t * (q.r - prev_r));
    }
    prev_r = q.r;
    prev_y = q.y;
  }
  return 2.0 * pts.back().r;
}

}  // namespace

AcfFit fit_acf(const AcfSample& sample, const FitOptions& opts) {
  std::vector<AcfBin> bins;
  for (const auto& b : sample.bins)
    if (b.fit && b.pair_count > 0 && b.radius_mm > 0.0) bins.push_back(b);
  require(bins.size() >= 4, ErrorKind::Precondition,
          fmt::format("fit_acf: needs >= 4 fitting bins (has {})", bins.size()));
  std::sort(bins.begin(), bins.end(),
            [](const AcfBin& x, const AcfBin& y) { return x.radius_mm < y.radius_mm; });

  double total = 0.0;
  for (const auto& b : bins) total += static_cast<double>(b.pair_count);
  std::vector<Point> pts;
  pts.reserve(bins.size());
  for (const auto& b : bins) {
    pts.push_back({b.radius_mm, b.mean_corr, std::sqrt(static_cast<double>(b.pair_count) / total)});
  }

  const double fwhm0 = opts.fwhm_hint_mm.value_or(crossing_fwhm(pts));
  const double s = std::max(fwhm0, 1e-2) / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const std::array<AcfParams, 5> starts{{
      {0.5, s, s},
      {0.8, s, s},
      {0.2, s, s},
      {0.5, 0.6 * s, 1.5 * s},
      {0.5, 1.5 * s, 0.6 * s},
  }};

  AcfFit best;
  best.objective = std::numeric_limits<double>::infinity();
  bool any_converged = false;
  RunResult best_any{{}, std::numeric_limits<double>::infinity(), 0, false};
  for (int k = 0; k < static_cast<int>(starts.size()); ++k) {
    const RunResult r = levenberg_marquardt(pts, starts[k], opts);
    if (r.objective < best_any.objective) best_any = r;
    if (r.converged && r.objective < best.objective) {
      best = {r.params, r.objective, r.iterations, k};
      any_converged = true;
    }
  }
  if (!any_converged) {
    throw FitFailure(fmt::format("fit_acf: no restart converged in {} iterations (best objective {})",
                                 opts.max_iterations, best_any.objective),
                     best_any.params, best_any.objective);
  }
  return best;
}

}  // namespace acfclust
