#include <doctest.h>

#include <cmath>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "acfclust/error.hpp"
#include "acfclust/harness.hpp"

using namespace acfclust;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_experiment_config(is);
}

std::string config_error(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    return e.what();
  }
  FAIL("expected a Config error");
  return {};
}

// Values on a 2^-32 lattice, like the harness's stored FWHMs.
double lattice(double x) { return std::ldexp(std::nearbyint(std::ldexp(x, 32)), -32); }

SubjectResult fake_subject(std::size_t id, const std::string& cond, std::vector<double> fwhm,
                           std::vector<std::uint64_t> vox, const std::vector<double>& sizes) {
  SubjectResult s;
  s.subject = id;
  s.condition = cond;
  s.acf = {0.5, 2.0 + 0.1 * static_cast<double>(id), 3.0};
  for (std::size_t d = 0; d < sizes.size(); ++d) {
    CellResult c;
    c.delta_mm = sizes[d];
    c.ok = true;
    c.fit = {0.41 + 0.01 * static_cast<double>(d), 3.3, 4.7};
    c.fwhm_mm = lattice(fwhm[d]);
    c.mask_count = 1000 + d;
    const double vol = sizes[d] * sizes[d] * sizes[d];
    c.thresholds = {{0.01, vox[d] * 3, static_cast<double>(vox[d] * 3) * vol},
                    {0.001, vox[d], static_cast<double>(vox[d]) * vol}};
    s.cells.push_back(c);
  }
  return s;
}

std::vector<SubjectResult> fake_cohort(std::size_t n, const std::vector<double>& sizes) {
  std::vector<SubjectResult> out;
  for (const char* cond : {"pamenc", "rest"})
    for (std::size_t i = 0; i < n; ++i) {
      const double base = 11.0 + 0.37 * static_cast<double>(i) + (cond[0] == 'r' ? 0.11 : 0.0);
      std::vector<double> f;
      std::vector<std::uint64_t> v;
      for (std::size_t d = 0; d < sizes.size(); ++d) {
        f.push_back(base + 0.123456789 * static_cast<double>(d * (i + 1)) + 1e-3 / (1.0 + i));
        v.push_back(40 + 7 * i + 13 * d + (cond[0] == 'r' ? 2 : 0));
      }
      out.push_back(fake_subject(i, cond, f, v, sizes));
    }
  return out;
}

struct Polyline {
  std::vector<std::pair<double, double>> pts;
};

std::vector<Polyline> polylines(const std::string& svg) {
  std::vector<Polyline> out;
  const std::regex line(R"re(<polyline class="subject"[^>]*points="([^"]*)")re");
  const std::regex pt(R"(([-0-9.]+),([-0-9.]+))");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), line); it != std::sregex_iterator(); ++it) {
    Polyline p;
    const std::string pts = (*it)[1];
    for (auto jt = std::sregex_iterator(pts.begin(), pts.end(), pt); jt != std::sregex_iterator(); ++jt)
      p.pts.emplace_back(std::stod((*jt)[1]), std::stod((*jt)[2]));
    out.push_back(p);
  }
  return out;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.n_subjects = 2;
  c.native_grid = VolumeGrid({10, 10, 8}, {3.0, 3.0, 4.0});
  c.n_frames = 10;
  c.resample_sizes = {3.0, 2.0};
  c.n_iter = 40;
  c.athr = 0.05;
  c.r_max_mm = 12.0;
  return c;
}

}  // namespace

TEST_CASE("config parsing, defaults and round trip") {
  const ExperimentConfig d = parse("# only comments\n\n");
  CHECK(d.n_subjects == 78);
  CHECK(d.native_grid == VolumeGrid({16, 16, 12}, {3.0, 3.0, 4.0}));
  CHECK(d.resample_sizes == std::vector<double>{3, 2, 1});
  CHECK(d.blur_fwhm_mm == 8.0);
  CHECK(d.n_iter == 2000);

  const ExperimentConfig c = parse(
      "n_subjects = 5\nresample_sizes = 1 3 2\nconditions = a b_2\nmask = ellipsoid\n"
      "pthr = 0.01 0.001\nnn = 3\nsided = 2\nn_iter = 400\nseed = 17  # trailing\n"
      "native_dims = 8 9 10\nnative_spacing = 2 2.5 3\nsubject_acf = 0.4 2 3\n");
  CHECK(c.n_subjects == 5);
  CHECK(c.resample_sizes == std::vector<double>{3, 2, 1});
  CHECK(c.conditions == std::vector<std::string>{"a", "b_2"});
  CHECK(c.mask == MaskKind::Ellipsoid);
  CHECK(c.conn == Connectivity::NN3);
  CHECK(c.sidedness == Sidedness::TwoSided);
  CHECK(c.master_seed == 17);
  CHECK(c.native_grid == VolumeGrid({8, 9, 10}, {2.0, 2.5, 3.0}));
  CHECK(c.subject_acf == AcfParams{0.4, 2, 3});

  std::ostringstream os;
  write_experiment_config(os, c);
  const ExperimentConfig r = parse(os.str());
  std::ostringstream os2;
  write_experiment_config(os2, r);
  CHECK(os.str() == os2.str());
}

TEST_CASE("config errors are collected and reported") {
  const std::string msg = config_error("bogus = 1\nn_frames = x\nfoo\n");
  CHECK(msg.find("line 1") != std::string::npos);
  CHECK(msg.find("bogus") != std::string::npos);
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(msg.find("line 3") != std::string::npos);
  config_error("athr = 0.05\nn_iter = 10\n");
  config_error("report_pthr = 0.02\n");
  config_error("resample_sizes = 2 2\n");
  config_error("conditions = has/slash\n");
  config_error("nn = 4\n");
  config_error("pthr = 1.5\n");
  try {
    load_experiment_config("/nonexistent/dir/exp.cfg");
    FAIL("expected Io");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}

TEST_CASE("delta specs") {
  const auto s = delta_specs(3);
  REQUIRE(s.size() == 3);
  CHECK((s[0].later == 1 && s[0].earlier == 0));
  CHECK((s[1].later == 2 && s[1].earlier == 1));
  CHECK((s[2].later == 2 && s[2].earlier == 0));
  CHECK(delta_specs(2).size() == 1);
  CHECK(delta_specs(1).empty());
}

TEST_CASE("aggregate: constant series give zero deltas") {
  const std::vector<double> sizes{3, 2, 1};
  std::vector<SubjectResult> subs;
  for (const char* cond : {"pamenc", "rest"})
    for (std::size_t i = 0; i < 4; ++i) {
      SubjectResult s = fake_subject(i, cond, {11.5, 11.5, 11.5}, {30, 30, 30}, sizes);
      for (auto& c : s.cells) c.thresholds[1].mm3 = 810.0;
      subs.push_back(s);
    }
  const StabilityReport r = aggregate(subs, sizes, {0.01, 0.001}, 0.001, {"pamenc", "rest"});
  for (const auto& sum : r.summaries) {
    CHECK(sum.completed == 4);
    for (const auto& d : sum.fwhm_delta) {
      CHECK(d.mean == 0.0);
      CHECK(d.stdev == 0.0);
    }
    for (const auto& d : sum.threshold_delta) {
      CHECK(d.mean == 0.0);
      CHECK(d.stdev == 0.0);
    }
  }
  for (const auto& p : r.fwhm_paired) {
    REQUIRE(p.result.has_value());
    CHECK(p.result->t == 0.0);
    CHECK(p.result->p_two_sided == 1.0);
  }
}

TEST_CASE("aggregate: telescoping identity and summary values") {
  const std::vector<double> sizes{3, 2, 1};
  const auto subs = fake_cohort(6, sizes);
  const StabilityReport r = aggregate(subs, sizes, {0.01, 0.001}, 0.001, {"pamenc", "rest"});
  for (const auto& s : r.subjects)
    for (auto q : {Quantity::Fwhm, Quantity::Threshold}) {
      const auto v = subject_series(s, q, 0.001);
      REQUIRE(v.has_value());
      CHECK((*v)[2] - (*v)[0] == ((*v)[2] - (*v)[1]) + ((*v)[1] - (*v)[0]));
    }
  const auto& p = r.summaries[0];
  std::vector<double> d13;
  for (const auto& s : subs)
    if (s.condition == "pamenc") d13.push_back(s.cells[2].fwhm_mm - s.cells[0].fwhm_mm);
  const auto ref = delta_stats(d13);
  CHECK(p.fwhm_delta[2].mean == doctest::Approx(ref.mean).epsilon(1e-14));
  CHECK(p.fwhm_delta[2].stdev == doctest::Approx(ref.stdev).epsilon(1e-12));
  CHECK(r.fwhm_paired.size() == 3);
  CHECK(r.threshold_paired.size() == 3);

  CHECK_FALSE(fake_subject(0, "x", {1, 2}, {1, 2}, {3, 2}).cells.empty());
  std::vector<SubjectResult> broken = subs;
  for (auto& s : broken)
    if (s.condition == "rest" && s.subject > 0) s.cells[1].ok = false;
  try {
    aggregate(broken, sizes, {0.01, 0.001}, 0.001, {"pamenc", "rest"});
    FAIL("expected InsufficientData");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientData);
  }
}

TEST_CASE("report CSV round trip is exact") {
  const std::vector<double> sizes{3, 2, 1};
  auto subs = fake_cohort(3, sizes);
  subs[1].cells[1].ok = false;
  subs[1].cells[1].error = "FitFailure: bad, \"quoted\"\nline";
  subs[1].cells[1].thresholds.clear();
  const StabilityReport r = aggregate(subs, sizes, {0.01, 0.001}, 0.001, {"pamenc", "rest"});
  std::ostringstream os;
  write_report_csv(os, r);
  std::istringstream is(os.str());
  const StabilityReport back = read_report_csv(is);
  CHECK(back.resample_sizes == r.resample_sizes);
  CHECK(back.pthr_list == r.pthr_list);
  CHECK(back.report_pthr == r.report_pthr);
  CHECK(back.conditions == r.conditions);
  REQUIRE(back.subjects.size() == r.subjects.size());
  for (std::size_t i = 0; i < r.subjects.size(); ++i) {
    const auto& a = r.subjects[i];
    const auto& b = back.subjects[i];
    CHECK(a.subject == b.subject);
    CHECK(a.condition == b.condition);
    CHECK(a.acf == b.acf);
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t d = 0; d < a.cells.size(); ++d) {
      CHECK(a.cells[d].delta_mm == b.cells[d].delta_mm);
      CHECK(a.cells[d].ok == b.cells[d].ok);
      CHECK(a.cells[d].fit == b.cells[d].fit);
      CHECK(a.cells[d].fwhm_mm == b.cells[d].fwhm_mm);
      CHECK(a.cells[d].mask_count == b.cells[d].mask_count);
      REQUIRE(a.cells[d].thresholds.size() == b.cells[d].thresholds.size());
      for (std::size_t k = 0; k < a.cells[d].thresholds.size(); ++k) {
        CHECK(a.cells[d].thresholds[k].voxels == b.cells[d].thresholds[k].voxels);
        CHECK(a.cells[d].thresholds[k].mm3 == b.cells[d].thresholds[k].mm3);
      }
    }
  }
  CHECK_FALSE(back.subjects[1].cells[1].error.empty());
  std::ostringstream os2;
  write_report_csv(os2, aggregate(back.subjects, back.resample_sizes, back.pthr_list, back.report_pthr,
                                  back.conditions));
  CHECK(os2.str() == os.str());
}

TEST_CASE("spaghetti SVG structure and margins") {
  const std::vector<double> sizes{3, 2, 1};
  const auto subs = fake_cohort(2, sizes);
  const StabilityReport r = aggregate(subs, sizes, {0.01, 0.001}, 0.001, {"pamenc", "rest"});
  for (auto q : {Quantity::Fwhm, Quantity::Threshold}) {
    std::ostringstream os;
    write_spaghetti_svg(os, r, "pamenc", q);
    const std::string svg = os.str();
    std::smatch m;
    REQUIRE(std::regex_search(svg, m,
                              std::regex(R"re(class="plot-area" x="([0-9.]+)" y="([0-9.]+)" width="([0-9.]+)" height="([0-9.]+)")re")));
    const double x0 = std::stod(m[1]), y0 = std::stod(m[2]), w = std::stod(m[3]), h = std::stod(m[4]);
    const auto lines = polylines(svg);
    REQUIRE(lines.size() == 2);
    for (const auto& l : lines) {
      REQUIRE(l.pts.size() == 3);
      CHECK(l.pts[0].first < l.pts[1].first);
      CHECK(l.pts[1].first < l.pts[2].first);
      for (const auto& [x, y] : l.pts) {
        CHECK(x >= x0 + 0.02 * w);
        CHECK(x <= x0 + w - 0.02 * w);
        CHECK(y >= y0 + 0.02 * h);
        CHECK(y <= y0 + h - 0.02 * h);
      }
    }
    CHECK(svg.find(q == Quantity::Fwhm ? "FWHM (mm)" : "Volume (mm") != std::string::npos);
  }
}

TEST_CASE("tables text layout") {
  const std::vector<double> sizes{3, 2, 1};
  const StabilityReport r = aggregate(fake_cohort(4, sizes), sizes, {0.01, 0.001}, 0.001, {"pamenc", "rest"});
  std::ostringstream os;
  write_tables(os, r);
  const std::string t = os.str();
  const auto w = t.find("W(2) - W(3)");
  const auto c = t.find("C(2) - C(3)");
  const auto pt = t.find("Paired t-tests");
  const auto md = t.find("pamenc mean diff W(1) - W(3) = ");
  const auto ps = t.find("paired t-stat on pamenc-rest W(1) - W(3) = ");
  CHECK(w != std::string::npos);
  CHECK(c != std::string::npos);
  CHECK(pt != std::string::npos);
  CHECK(md != std::string::npos);
  CHECK(ps != std::string::npos);
  CHECK(w < pt);
  CHECK(pt < c);
  CHECK(c < md);
  CHECK(t.find(" ± ") != std::string::npos);
  CHECK(std::regex_search(t, std::regex(R"([+-][0-9]+\.[0-9]{2} ± [0-9]+\.[0-9]{2})")));
}

TEST_CASE("run_subject is deterministic and blur widens the ACF") {
  const ExperimentConfig c = tiny_config();
  const SubjectResult a = run_subject(c, 1, 0);
  const SubjectResult b = run_subject(c, 1, 0);
  REQUIRE(a.cells.size() == 2);
  for (std::size_t d = 0; d < 2; ++d) {
    INFO(a.cells[d].error);
    REQUIRE(a.cells[d].ok);
    CHECK(a.cells[d].fwhm_mm == b.cells[d].fwhm_mm);
    CHECK(a.cells[d].fit == b.cells[d].fit);
    CHECK(a.cells[d].thresholds.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) CHECK(a.cells[d].thresholds[k].voxels == b.cells[d].thresholds[k].voxels);
    CHECK(a.cells[d].fwhm_mm >= c.blur_fwhm_mm);
  }
  CHECK(a.acf == subject_acf(c, 1));
  CHECK_FALSE(subject_acf(c, 1) == subject_acf(c, 2));
  const SubjectResult other = run_subject(c, 1, 1);
  CHECK(other.cells[0].fwhm_mm != a.cells[0].fwhm_mm);
}

TEST_CASE("unblurred native-grid path recovers the generating FWHM") {
  ExperimentConfig c = tiny_config();
  c.native_grid = VolumeGrid::isotropic({24, 24, 24}, 3.0);
  c.resample_sizes = {3.0};
  c.blur_fwhm_mm = 0.0;
  c.subject_acf = {0.5, 3.0, 4.0};
  c.acf_jitter = 0.0;
  c.n_frames = 60;
  c.r_max_mm = 20.0;
  const SubjectResult s = run_subject(c, 0, 0);
  REQUIRE(s.cells.size() == 1);
  INFO(s.cells[0].error);
  REQUIRE(s.cells[0].ok);
  const double truth = fwhm_from_acf(c.subject_acf).fwhm_mm;
  CHECK(std::fabs(s.cells[0].fwhm_mm - truth) < 0.1 * truth);
}

TEST_CASE("failed cells are recorded, not thrown") {
  ExperimentConfig c = tiny_config();
  c.native_grid = VolumeGrid({4, 4, 4}, {3.0, 3.0, 4.0});
  c.resample_sizes = {3.0};
  const SubjectResult s = run_subject(c, 0, 0);
  REQUIRE(s.cells.size() == 1);
  CHECK_FALSE(s.cells[0].ok);
  CHECK(s.cells[0].error.find("precondition violated") == 0);
  CHECK_FALSE(s.complete());
}
