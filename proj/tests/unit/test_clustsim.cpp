#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "acfclust/clustsim.hpp"
#include "acfclust/error.hpp"

using namespace acfclust;

namespace {

MaxSizeTable single(std::vector<std::uint32_t> sizes) {
  MaxSizeTable t;
  t.pthr_list = {0.001};
  t.n_iter = sizes.size();
  t.sizes = {std::move(sizes)};
  return t;
}

std::uint64_t sort_oracle(std::vector<std::uint32_t> s, double athr) {
  const auto k = static_cast<std::size_t>(std::floor(athr * static_cast<double>(s.size())));
  std::sort(s.begin(), s.end(), std::greater<>());
  std::uint64_t thr = s[k - 1];
  const auto reach = std::count_if(s.begin(), s.end(), [&](std::uint32_t v) { return v >= thr; });
  if (static_cast<std::size_t>(reach) > k) ++thr;
  return thr;
}

std::uint32_t median(std::vector<std::uint32_t> v) {
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
  return v[v.size() / 2];
}

SimConfig small_config(std::size_t n_iter) {
  SimConfig c({0.5, 3.0, 4.0}, Mask::full(VolumeGrid::isotropic({24, 24, 24}, 2.0)));
  c.n_iter = n_iter;
  c.athr = 0.25;
  c.master_seed = 99;
  return c;
}

ErrorKind kind_of(const SimConfig& c) {
  try {
    validate(c);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("order-statistic threshold rule") {
  const auto a = threshold_from_table(single({5, 4, 3, 2, 1}), 0.2, 5, 8.0);
  CHECK(a.rows.at(0).voxels == 5);
  CHECK(a.rows.at(0).mm3 == 40.0);
  CHECK(achieved_fpr({5, 4, 3, 2, 1}, 5) == doctest::Approx(0.2));

  const std::vector<std::uint32_t> sevens(10, 7);
  const auto b = threshold_from_table(single(sevens), 0.2, 10, 1.0);
  CHECK(b.rows.at(0).voxels == 8);
  CHECK(achieved_fpr(sevens, 8) == 0.0);

  CHECK_THROWS_AS(threshold_from_table(single({1, 2, 3}), 0.2, 3, 1.0), Error);
  CHECK_THROWS_AS(threshold_from_table(single({1, 2, 3}), 0.5, 4, 1.0), Error);
}

TEST_CASE("threshold matches a sort oracle on geometric sizes") {
  std::mt19937_64 gen(2024);
  for (double q : {0.05, 0.2, 0.5}) {
    std::geometric_distribution<std::uint32_t> geo(q);
    std::vector<std::uint32_t> s(10000);
    for (auto& v : s) v = geo(gen);
    for (double athr : {0.05, 0.01, 0.1}) {
      const auto t = threshold_from_table(single(s), athr, s.size(), 1.0);
      CHECK(t.rows[0].voxels == sort_oracle(s, athr));
      CHECK(achieved_fpr(s, t.rows[0].voxels) <= athr);
    }
  }
}

TEST_CASE("voxel-to-mm3 conversion is exact") {
  const std::vector<std::uint32_t> s{9, 8, 8, 3, 1, 1, 0, 0, 0, 0};
  const auto t1 = threshold_from_table(single(s), 0.2, s.size(), 1.0);
  for (double vol : {8.0, 27.0, 2.0 * 2.5 * 3.3}) {
    const auto t = threshold_from_table(single(s), 0.2, s.size(), vol);
    CHECK(t.rows[0].voxels == t1.rows[0].voxels);
    CHECK(t.rows[0].mm3 == static_cast<double>(t1.rows[0].voxels) * vol);
  }
}

TEST_CASE("config validation") {
  SimConfig c = small_config(100);
  CHECK_NOTHROW(validate(c));
  c.pthr_list = {0.0};
  CHECK(kind_of(c) == ErrorKind::Config);
  c = small_config(100);
  c.athr = 1.0;
  CHECK(kind_of(c) == ErrorKind::Config);
  c = small_config(3);
  CHECK(kind_of(c) == ErrorKind::Config);
  c = small_config(100);
  c.athr = 0.005;
  CHECK(kind_of(c) == ErrorKind::Config);
  c = small_config(100);
  c.mask = Mask(c.grid, std::vector<std::uint8_t>(c.grid.size(), 0));
  CHECK(kind_of(c) == ErrorKind::EmptyMask);
  c = small_config(100);
  c.grid = VolumeGrid::isotropic({8, 8, 8}, 2.0);
  CHECK(kind_of(c) == ErrorKind::GridMismatch);
}

TEST_CASE("simulation is deterministic and independent of worker count") {
  SimConfig c = small_config(8);
  const MaxSizeTable a = run_simulation(c);
  const MaxSizeTable b = run_simulation(c);
  CHECK(a.sizes == b.sizes);
  CHECK(a.n_iter == 8);
  for (const auto& s : a.sizes) CHECK(s.size() == 8);
  c.jobs = 3;
  CHECK(run_simulation(c).sizes == a.sizes);
  c.jobs = 1;
  c.master_seed = 100;
  CHECK(run_simulation(c).sizes != a.sizes);

  // Lower per-voxel threshold p means a higher z and smaller clusters.
  for (std::size_t i = 0; i < a.n_iter; ++i)
    for (std::size_t p = 1; p < a.pthr_list.size(); ++p) CHECK(a.sizes[p][i] <= a.sizes[p - 1][i]);

  const ThresholdTable t = clustsim(small_config(8));
  const ThresholdTable u = threshold_from_table(a, 0.25, 8, 8.0);
  REQUIRE(t.rows.size() == u.rows.size());
  for (std::size_t p = 0; p < t.rows.size(); ++p) {
    CHECK(t.rows[p].voxels == u.rows[p].voxels);
    CHECK(t.rows[p].mm3 == u.rows[p].mm3);
    if (p > 0) CHECK(t.rows[p].voxels <= t.rows[p - 1].voxels);
  }
  CHECK(t.at_pthr(0.001).pthr == 0.001);
  CHECK_THROWS_AS(t.at_pthr(0.3), Error);
}

TEST_CASE("realization offsets select a slice of the default sequence") {
  SimConfig full = small_config(10);
  const MaxSizeTable a = run_simulation(full);
  SimConfig part = small_config(5);
  part.first_realization = 3;
  const MaxSizeTable b = run_simulation(part);
  for (std::size_t p = 0; p < a.pthr_list.size(); ++p)
    for (std::size_t i = 0; i < 5; ++i) CHECK(b.sizes[p][i] == a.sizes[p][3 + i]);
}

TEST_CASE("white-noise-like fields rarely form multi-voxel clusters") {
  SimConfig c({1.0, 0.3, 1.0}, Mask::full(VolumeGrid::isotropic({48, 48, 48}, 2.0)));
  c.pthr_list = {0.001};
  c.n_iter = 40;
  c.athr = 0.05;
  c.master_seed = 5;
  const MaxSizeTable t = run_simulation(c);
  CHECK(median(t.sizes[0]) <= 2);
}

TEST_CASE("smoother fields need larger cluster thresholds") {
  const Mask m = Mask::full(VolumeGrid::isotropic({32, 32, 32}, 2.0));
  const double k = 2.0 * std::sqrt(2.0 * std::log(2.0));
  auto run = [&](double fwhm) {
    SimConfig c({1.0, fwhm / k, 1.0}, m);
    c.pthr_list = {0.001};
    c.n_iter = 100;
    c.athr = 0.1;
    c.master_seed = 11;
    const MaxSizeTable t = run_simulation(c);
    std::vector<std::uint32_t> first20(t.sizes[0].begin(), t.sizes[0].begin() + 20);
    return std::pair{median(first20), threshold_from_table(t, c.athr, c.n_iter, 8.0).rows[0].voxels};
  };
  const auto [med4, thr4] = run(4.0);
  const auto [med8, thr8] = run(8.0);
  CHECK(med8 > med4);
  CHECK(thr8 > thr4);
}

TEST_CASE("threshold CSV layout") {
  ThresholdTable t;
  t.params = {0.5, 3, 4};
  t.fwhm_mm = 7.5;
  t.grid = VolumeGrid::isotropic({4, 5, 6}, 2.0);
  t.mask_count = 120;
  t.n_iter = 100;
  t.athr = 0.05;
  t.seed = 7;
  t.rows = {{0.01, 12, 96.0}, {0.001, 3, 24.0}};
  std::ostringstream os;
  write_threshold_csv(os, t);
  const std::string s = os.str();
  CHECK(s.find("# a = 0.5\n") == 0);
  CHECK(s.find("# grid = 4 5 6\n") != std::string::npos);
  CHECK(s.find("# nn = NN2\n") != std::string::npos);
  CHECK(s.find("# sided = 1sided\n") != std::string::npos);
  CHECK(s.find("warning") == std::string::npos);
  const auto body = s.substr(s.find("pthr,"));
  CHECK(body == "pthr,threshold_voxels,threshold_mm3\n0.01,12,96\n0.001,3,24\n");
  t.ill_conditioned = true;
  std::ostringstream w;
  write_threshold_csv(w, t);
  CHECK(w.str().find("# warning = ") != std::string::npos);
}
