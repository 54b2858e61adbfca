#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "acfclust/error.hpp"
#include "acfclust/harness.hpp"

namespace acfclust {

void validate(ExperimentConfig& c) {
  require(c.n_subjects >= 1, ErrorKind::Config, "n_subjects must be >= 1");
  require(c.n_frames >= 2, ErrorKind::Config, "n_frames must be >= 2");
  validate(c.subject_acf);
  require(c.acf_jitter >= 0.0 && c.acf_jitter < 1.0, ErrorKind::Config, "acf_jitter must lie in [0, 1)");
  require(!c.resample_sizes.empty(), ErrorKind::Config, "resample_sizes is empty");
  for (double d : c.resample_sizes)
    require(d > 0.0 && std::isfinite(d), ErrorKind::Config, "resample sizes must be > 0");
  std::sort(c.resample_sizes.begin(), c.resample_sizes.end(), std::greater<>());
  require(std::adjacent_find(c.resample_sizes.begin(), c.resample_sizes.end()) == c.resample_sizes.end(),
          ErrorKind::Config, "resample sizes must be distinct");
  require(c.blur_fwhm_mm >= 0.0, ErrorKind::Config, "blur_fwhm_mm must be >= 0");
  require(!c.conditions.empty(), ErrorKind::Config, "conditions is empty");
  for (const auto& name : c.conditions) {
    const bool ok = !name.empty() && std::all_of(name.begin(), name.end(), [](char ch) {
      return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
    });
    require(ok, ErrorKind::Config, fmt::format("condition name '{}' must be [A-Za-z0-9_-]+", name));
  }
  auto names = c.conditions;
  std::sort(names.begin(), names.end());
  require(std::adjacent_find(names.begin(), names.end()) == names.end(), ErrorKind::Config,
          "condition names must be distinct");
  require(std::find(c.pthr_list.begin(), c.pthr_list.end(), c.report_pthr) != c.pthr_list.end(),
          ErrorKind::Config, fmt::format("report_pthr {} is not in the pthr list", c.report_pthr));
  require(c.r_max_mm > 0.0, ErrorKind::Config, "r_max_mm must be > 0");
  SimConfig probe(AcfParams{}, Mask::full(VolumeGrid::isotropic({1, 1, 1}, 1.0)));
  probe.pthr_list = c.pthr_list;
  probe.athr = c.athr;
  probe.n_iter = c.n_iter;
  validate(probe);
}

namespace {

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

template <class T>
bool parse_number(const std::string& w, T& out) {
  const char* end = w.data() + w.size();
  const auto [ptr, ec] = std::from_chars(w.data(), end, out);
  return ec == std::errc() && ptr == end;
}

template <class T>
std::vector<T> parse_list(const std::string& value) {
  std::vector<T> out;
  for (const auto& w : split_words(value)) {
    T x{};
    if (!parse_number(w, x)) throw std::invalid_argument(w);
    out.push_back(x);
  }
  if (out.empty()) throw std::invalid_argument("empty");
  return out;
}

template <class T>
T parse_one(const std::string& value) {
  const auto v = parse_list<T>(value);
  if (v.size() != 1) throw std::invalid_argument(value);
  return v[0];
}

template <class T, std::size_t N>
std::array<T, N> parse_array(const std::string& value) {
  const auto v = parse_list<T>(value);
  if (v.size() != N) throw std::invalid_argument(value);
  std::array<T, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& is) {
  ExperimentConfig c;
  Index3 dims = c.native_grid.dims();
  Vec3 spacing = c.native_grid.spacing();

  using Setter = std::function<void(const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"n_subjects", [&](const std::string& v) { c.n_subjects = parse_one<std::size_t>(v); }},
      {"n_frames", [&](const std::string& v) { c.n_frames = parse_one<std::size_t>(v); }},
      {"native_dims", [&](const std::string& v) { dims = parse_array<int, 3>(v); }},
      {"native_spacing", [&](const std::string& v) { spacing = parse_array<double, 3>(v); }},
      {"subject_acf",
       [&](const std::string& v) {
         const auto p = parse_array<double, 3>(v);
         c.subject_acf = {p[0], p[1], p[2]};
       }},
      {"acf_jitter", [&](const std::string& v) { c.acf_jitter = parse_one<double>(v); }},
      {"resample_sizes", [&](const std::string& v) { c.resample_sizes = parse_list<double>(v); }},
      {"blur_fwhm_mm", [&](const std::string& v) { c.blur_fwhm_mm = parse_one<double>(v); }},
      {"conditions",
       [&](const std::string& v) {
         c.conditions = split_words(v);
         if (c.conditions.empty()) throw std::invalid_argument(v);
       }},
      {"mask",
       [&](const std::string& v) {
         if (v == "full") c.mask = MaskKind::Full;
         else if (v == "ellipsoid") c.mask = MaskKind::Ellipsoid;
         else throw std::invalid_argument(v);
       }},
      {"pthr", [&](const std::string& v) { c.pthr_list = parse_list<double>(v); }},
      {"athr", [&](const std::string& v) { c.athr = parse_one<double>(v); }},
      {"nn",
       [&](const std::string& v) {
         const int nn = parse_one<int>(v);
         if (nn < 1 || nn > 3) throw std::invalid_argument(v);
         c.conn = static_cast<Connectivity>(nn);
       }},
      {"sided",
       [&](const std::string& v) {
         if (v == "1") c.sidedness = Sidedness::OneSided;
         else if (v == "2") c.sidedness = Sidedness::TwoSided;
         else throw std::invalid_argument(v);
       }},
      {"n_iter", [&](const std::string& v) { c.n_iter = parse_one<std::size_t>(v); }},
      {"report_pthr", [&](const std::string& v) { c.report_pthr = parse_one<double>(v); }},
      {"r_max_mm", [&](const std::string& v) { c.r_max_mm = parse_one<double>(v); }},
      {"seed", [&](const std::string& v) { c.master_seed = parse_one<std::uint64_t>(v); }},
  };

  std::vector<std::string> problems;
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back(fmt::format("line {}: expected 'key = value'", lineno));
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      problems.push_back(fmt::format("line {}: unknown key '{}'", lineno, key));
      continue;
    }
    try {
      it->second(value);
    } catch (const std::invalid_argument&) {
      problems.push_back(fmt::format("line {}: bad value for '{}': '{}'", lineno, key, value));
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid experiment config:";
    for (const auto& p : problems) msg += "\n  " + p;
    fail(ErrorKind::Config, msg);
  }
  try {
    c.native_grid = VolumeGrid(dims, spacing);
  } catch (const Error& e) {
    fail(ErrorKind::Config, fmt::format("invalid native grid: {}", e.what()));
  }
  validate(c);
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, fmt::format("cannot open config '{}'", path.string()));
  return parse_experiment_config(in);
}

void write_experiment_config(std::ostream& os, const ExperimentConfig& c) {
  const auto& g = c.native_grid;
  fmt::print(os, "n_subjects = {}\n", c.n_subjects);
  fmt::print(os, "n_frames = {}\n", c.n_frames);
  fmt::print(os, "native_dims = {} {} {}\n", g.nx(), g.ny(), g.nz());
  fmt::print(os, "native_spacing = {} {} {}\n", g.spacing()[0], g.spacing()[1], g.spacing()[2]);
  fmt::print(os, "subject_acf = {} {} {}\n", c.subject_acf.a, c.subject_acf.b, c.subject_acf.c);
  fmt::print(os, "acf_jitter = {}\n", c.acf_jitter);
  fmt::print(os, "resample_sizes = {}\n", fmt::join(c.resample_sizes, " "));
  fmt::print(os, "blur_fwhm_mm = {}\n", c.blur_fwhm_mm);
  fmt::print(os, "conditions = {}\n", fmt::join(c.conditions, " "));
  fmt::print(os, "mask = {}\n", c.mask == MaskKind::Full ? "full" : "ellipsoid");
  fmt::print(os, "pthr = {}\n", fmt::join(c.pthr_list, " "));
  fmt::print(os, "athr = {}\n", c.athr);
  fmt::print(os, "nn = {}\n", static_cast<int>(c.conn));
  fmt::print(os, "sided = {}\n", c.sidedness == Sidedness::OneSided ? 1 : 2);
  fmt::print(os, "n_iter = {}\n", c.n_iter);
  fmt::print(os, "report_pthr = {}\n", c.report_pthr);
  fmt::print(os, "r_max_mm = {}\n", c.r_max_mm);
  fmt::print(os, "seed = {}\n", c.master_seed);
}

}  // namespace acfclust
