#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "acfclust/error.hpp"
#include "acfclust/harness.hpp"

namespace acfclust {

namespace {

std::string sanitize(std::string s) {
  for (auto& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

template <class T>
T number(const std::string& w, int lineno) {
  T x{};
  const char* end = w.data() + w.size();
  const auto [ptr, ec] = std::from_chars(w.data(), end, x);
  if (ec != std::errc() || ptr != end)
    fail(ErrorKind::Io, fmt::format("report.csv line {}: bad number '{}'", lineno, w));
  return x;
}

std::vector<double> numbers(const std::string& s, int lineno) {
  std::vector<double> out;
  std::istringstream is(s);
  for (std::string w; is >> w;) out.push_back(number<double>(w, lineno));
  return out;
}

constexpr const char* kFixedColumns =
    "condition,subject,delta_mm,ok,acf_a,acf_b,acf_c,fit_a,fit_b,fit_c,fwhm_mm,mask_count";

}  // namespace

void write_report_csv(std::ostream& os, const StabilityReport& rep) {
  fmt::print(os, "# resample_sizes = {}\n", fmt::join(rep.resample_sizes, " "));
  fmt::print(os, "# pthr = {}\n", fmt::join(rep.pthr_list, " "));
  fmt::print(os, "# report_pthr = {}\n", rep.report_pthr);
  fmt::print(os, "# conditions = {}\n", fmt::join(rep.conditions, " "));
  os << kFixedColumns;
  for (double p : rep.pthr_list) fmt::print(os, ",vox_p{0},mm3_p{0}", p);
  os << ",error\n";
  for (const auto& s : rep.subjects) {
    for (const auto& c : s.cells) {
      fmt::print(os, "{},{},{},{},{},{},{},{},{},{},{},{}", s.condition, s.subject, c.delta_mm, c.ok ? 1 : 0,
                 s.acf.a, s.acf.b, s.acf.c, c.fit.a, c.fit.b, c.fit.c, c.fwhm_mm, c.mask_count);
      for (double p : rep.pthr_list) {
        const ThresholdRow* r = c.at_pthr(p);
        if (r) fmt::print(os, ",{},{}", r->voxels, r->mm3);
        else os << ",,";
      }
      fmt::print(os, ",{}\n", sanitize(c.error));
    }
  }
}

StabilityReport read_report_csv(std::istream& is) {
  std::vector<double> sizes, pthr;
  double report_pthr = 0.001;
  std::vector<std::string> conditions;
  std::vector<SubjectResult> subjects;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(std::remove(key.begin(), key.end(), ' '), key.end());
      const std::string value = line.substr(eq + 1);
      if (key == "resample_sizes") sizes = numbers(value, lineno);
      else if (key == "pthr") pthr = numbers(value, lineno);
      else if (key == "report_pthr") {
        const auto v = numbers(value, lineno);
        if (v.size() != 1) fail(ErrorKind::Io, fmt::format("report.csv line {}: bad report_pthr", lineno));
        report_pthr = v[0];
      } else if (key == "conditions") {
        std::istringstream ws(value);
        for (std::string w; ws >> w;) conditions.push_back(w);
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto f = split(line, ',');
    const std::size_t expect = 12 + 2 * pthr.size() + 1;
    if (f.size() != expect)
      fail(ErrorKind::Io, fmt::format("report.csv line {}: {} fields, expected {}", lineno, f.size(), expect));
    const auto subject = number<std::size_t>(f[1], lineno);
    if (subjects.empty() || subjects.back().condition != f[0] || subjects.back().subject != subject) {
      SubjectResult s;
      s.condition = f[0];
      s.subject = subject;
      s.acf = {number<double>(f[4], lineno), number<double>(f[5], lineno), number<double>(f[6], lineno)};
      subjects.push_back(std::move(s));
    }
    CellResult c;
    c.delta_mm = number<double>(f[2], lineno);
    c.ok = f[3] == "1";
    c.fit = {number<double>(f[7], lineno), number<double>(f[8], lineno), number<double>(f[9], lineno)};
    c.fwhm_mm = number<double>(f[10], lineno);
    c.mask_count = number<std::size_t>(f[11], lineno);
    for (std::size_t p = 0; p < pthr.size(); ++p) {
      const auto& v = f[12 + 2 * p];
      const auto& m = f[13 + 2 * p];
      if (v.empty()) continue;
      c.thresholds.push_back({pthr[p], number<std::uint64_t>(v, lineno), number<double>(m, lineno)});
    }
    c.error = f.back();
    subjects.back().cells.push_back(std::move(c));
  }
  require(header_seen && !sizes.empty() && !conditions.empty(), ErrorKind::Io,
          "report.csv: missing metadata or header");
  return aggregate(std::move(subjects), sizes, pthr, report_pthr, conditions);
}

namespace {

struct Axis {
  double lo, hi;
};

// Data range padded by 5% of its span on each side (or of |value| when flat).
Axis padded_range(double lo, double hi) {
  double span = hi - lo;
  if (span <= 0.0) span = std::max(std::fabs(hi), 1.0);
  return {lo - 0.05 * span, hi + 0.05 * span};
}

std::string fmt_num(double v) {
  return fmt::format("{:.4g}", v);
}

}  // namespace

void write_spaghetti_svg(std::ostream& os, const StabilityReport& rep, const std::string& condition,
                         Quantity q) {
  constexpr double W = 640, H = 480, L = 80, R = 610, T = 50, B = 420;
  std::vector<std::vector<double>> lines;
  double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
  for (const auto& s : rep.subjects) {
    if (s.condition != condition) continue;
    auto v = subject_series(s, q, rep.report_pthr);
    if (!v) continue;
    for (double y : *v) {
      ylo = std::min(ylo, y);
      yhi = std::max(yhi, y);
    }
    lines.push_back(std::move(*v));
  }
  if (lines.empty()) ylo = yhi = 0.0;
  const auto [dlo, dhi] = std::minmax_element(rep.resample_sizes.begin(), rep.resample_sizes.end());
  const Axis xa = padded_range(*dlo, *dhi);
  const Axis ya = padded_range(ylo, yhi);
  // Resample size runs right to left: coarsest on the left, as in the figures.
  auto px = [&](double d) { return L + (xa.hi - d) / (xa.hi - xa.lo) * (R - L); };
  auto py = [&](double y) { return B - (y - ya.lo) / (ya.hi - ya.lo) * (B - T); };

  const bool fw = q == Quantity::Fwhm;
  const std::string title =
      fw ? fmt::format("FWHM vs resampling size ({})", condition)
         : fmt::format("Cluster-size threshold at p = {} vs resampling size ({})", rep.report_pthr, condition);
  fmt::print(os, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
             W, H, W, H);
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  fmt::print(os, "<text x=\"{}\" y=\"28\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n", W / 2, title);
  fmt::print(os,
             "<rect class=\"plot-area\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" "
             "stroke=\"black\"/>\n",
             L, T, R - L, B - T);
  for (double d : rep.resample_sizes) {
    const double x = px(d);
    fmt::print(os, "<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"black\"/>\n", x, B, B + 6);
    fmt::print(os, "<text x=\"{:.2f}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n", x, B + 20,
               d);
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = ya.lo + (ya.hi - ya.lo) * i / 4.0;
    const double yy = py(y);
    fmt::print(os, "<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"black\"/>\n", L - 6, yy, L);
    fmt::print(os, "<text x=\"{}\" y=\"{:.2f}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n", L - 9,
               yy + 4, fmt_num(y));
  }
  fmt::print(os, "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">Resampling size (mm)</text>\n",
             (L + R) / 2, H - 22);
  fmt::print(os,
             "<text x=\"20\" y=\"{0}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 20 {0})\">"
             "{1}</text>\n",
             (T + B) / 2, fw ? "FWHM (mm)" : "Volume (mm³)");
  for (std::size_t i = 0; i < lines.size(); ++i) {
    os << "<polyline class=\"subject\" fill=\"none\" stroke=\"#336699\" stroke-dasharray=\"2,3\" points=\"";
    for (std::size_t k = 0; k < lines[i].size(); ++k)
      fmt::print(os, "{}{:.2f},{:.2f}", k ? " " : "", px(rep.resample_sizes[k]), py(lines[i][k]));
    os << "\"/>\n";
  }
  os << "</svg>\n";
}

namespace {

std::string signed_pm(const DeltaStats& s, int prec) {
  return fmt::format("{:+.{}f} ± {:.{}f}", s.mean, prec, s.stdev, prec);
}

std::string delta_label(const StabilityReport& rep, const DeltaSpec& d, char sym) {
  return fmt::format("{0}({1}) - {0}({2})", sym, rep.resample_sizes[d.later], rep.resample_sizes[d.earlier]);
}

void paired_lines(std::ostream& os, const StabilityReport& rep, const std::vector<PairedComparison>& pcs,
                  const std::vector<DeltaSpec>& specs, char sym) {
  if (pcs.empty()) return;
  fmt::print(os, "Paired t-tests between {} and {} (two-sided):\n", rep.conditions[0], rep.conditions[1]);
  for (std::size_t i = 0; i < pcs.size(); ++i) {
    const auto label = delta_label(rep, specs[i], sym);
    if (pcs[i].result)
      fmt::print(os, "  {}: t = {:.4f}, df = {}, p = {:.4f}\n", label, pcs[i].result->t, pcs[i].result->df,
                 pcs[i].result->p_two_sided);
    else
      fmt::print(os, "  {}: not available ({})\n", label, pcs[i].error);
  }
}

}  // namespace

void write_tables(std::ostream& os, const StabilityReport& rep) {
  const auto specs = delta_specs(rep.resample_sizes.size());
  const auto block = [&](bool fw) {
    const char sym = fw ? 'W' : 'C';
    if (fw)
      os << "Changes in FWHM estimates W(Δ) as resampling size Δ shrinks (mean ± standard "
            "deviation, mm)\n";
    else
      fmt::print(os,
                 "Changes in cluster-size threshold estimates C(Δ) at p = {} (mean ± standard "
                 "deviation, mm³)\n",
                 rep.report_pthr);
    fmt::print(os, "{:<12}{:>6}", "condition", "n");
    for (const auto& d : specs) fmt::print(os, "  {:>22}", delta_label(rep, d, sym));
    os << "\n";
    for (const auto& s : rep.summaries) {
      fmt::print(os, "{:<12}{:>6}", s.condition, s.completed);
      for (std::size_t i = 0; i < specs.size(); ++i)
        fmt::print(os, "  {:>22}", signed_pm(fw ? s.fwhm_delta[i] : s.threshold_delta[i], fw ? 2 : 1));
      os << "\n";
    }
    paired_lines(os, rep, fw ? rep.fwhm_paired : rep.threshold_paired, specs, sym);
    os << "\n";
  };
  block(true);
  block(false);

  os << "Mean values per resampling size\n";
  for (const auto& s : rep.summaries) {
    for (std::size_t d = 0; d < rep.resample_sizes.size(); ++d)
      fmt::print(os, "  {} Δ = {} mm: FWHM = {:.3f} mm, threshold = {:.1f} mm³\n", s.condition,
                 rep.resample_sizes[d], s.mean_fwhm[d], s.mean_threshold[d]);
  }
  os << "\n";
  for (const auto& s : rep.summaries)
    for (std::size_t i = 0; i < specs.size(); ++i)
      fmt::print(os, "{} mean diff {} = {:.6g}\n", s.condition, delta_label(rep, specs[i], 'W'), s.fwhm_delta[i].mean);
  for (std::size_t i = 0; i < rep.fwhm_paired.size(); ++i)
    if (rep.fwhm_paired[i].result)
      fmt::print(os, "paired t-stat on {}-{} {} = {:.6g}\n", rep.conditions[0], rep.conditions[1],
                 delta_label(rep, specs[i], 'W'), rep.fwhm_paired[i].result->t);
  os << "\nNote: smoothness is estimated directly on blurred synthetic noise rather than on regression "
        "residuals, so absolute FWHM and threshold values are not comparable with real-data analyses; only "
        "their stability across resampling sizes is.\n";
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::Io, fmt::format("cannot write '{}'", p.string()));
  return os;
}

void close_out(std::ofstream& os, const std::filesystem::path& p) {
  os.close();
  require(!os.fail(), ErrorKind::Io, fmt::format("error writing '{}'", p.string()));
}

}  // namespace

void emit_plots(const StabilityReport& rep, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  for (const auto& cond : rep.conditions) {
    for (int q = 0; q < 2; ++q) {
      const auto p = dir / fmt::format("fig{}_{}.svg", q == 0 ? 2 : 3, cond);
      auto os = open_out(p);
      write_spaghetti_svg(os, rep, cond, q == 0 ? Quantity::Fwhm : Quantity::Threshold);
      close_out(os, p);
    }
  }
  const auto p = dir / "tables.txt";
  auto os = open_out(p);
  write_tables(os, rep);
  close_out(os, p);
}

void emit_report(const StabilityReport& rep, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  {
    const auto p = dir / "report.csv";
    auto os = open_out(p);
    write_report_csv(os, rep);
    close_out(os, p);
  }
  for (const auto& cond : rep.conditions) {
    for (std::size_t d = 0; d < rep.resample_sizes.size(); ++d) {
      const auto pb = dir / fmt::format("blurs.{}.R{}.csv", cond, rep.resample_sizes[d]);
      const auto pc = dir / fmt::format("csiz.{}.R{}.csv", cond, rep.resample_sizes[d]);
      auto ob = open_out(pb);
      auto oc = open_out(pc);
      ob << "subject,a,b,c,fwhm\n";
      oc << "subject,pthr,threshold_voxels,threshold_mm3\n";
      for (const auto& s : rep.subjects) {
        if (s.condition != cond || d >= s.cells.size() || !s.cells[d].ok) continue;
        const auto& c = s.cells[d];
        fmt::print(ob, "{},{},{},{},{}\n", s.subject, c.fit.a, c.fit.b, c.fit.c, c.fwhm_mm);
        for (const auto& r : c.thresholds) fmt::print(oc, "{},{},{},{}\n", s.subject, r.pthr, r.voxels, r.mm3);
      }
      close_out(ob, pb);
      close_out(oc, pc);
    }
  }
  emit_plots(rep, dir);
}

}  // namespace acfclust
