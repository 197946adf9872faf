#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "rbmlab/config_file.hpp"
#include "rbmlab/csv.hpp"
#include "rbmlab/geometry.hpp"
#include "rbmlab/green.hpp"
#include "rbmlab/rbm.hpp"
#include "rbmlab/semigroup.hpp"
#include "rbmlab/test_functions.hpp"
#include "rbmlab/verify.hpp"

// Experiment runner behind the rbmlab executable. Exit codes: 0 success (all
// requested checks pass), 1 a check failed or a run aborted, 2 bad command
// line or config.

namespace rbmlab::cli {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr std::uint64_t kDefaultSeed = 0x5EED;

namespace fs = std::filesystem;
using config::ConfigError;
using config::View;

struct Options {
  std::string subcommand;
  std::string config_path;
  std::string config_text;  // used instead of reading config_path when set
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::optional<std::string> out;
};

/// Output directory, manifest entries and overall status of one run.
class Run {
 public:
  Run(fs::path out, std::uint64_t seed, std::size_t workers) : out_(std::move(out)), seed_(seed), workers_(workers) {
    fs::create_directories(out_);
  }

  [[nodiscard]] const fs::path& out() const noexcept { return out_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::size_t workers() const noexcept { return workers_; }
  [[nodiscard]] bool all_pass() const noexcept { return all_pass_; }

  void set(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }
  void set(const std::string& key, double value) { set(key, format_double(value)); }

  std::string path(const std::string& file) {
    files_.push_back(file);
    return (out_ / file).string();
  }

  void record_check(const std::string& name, bool pass) {
    checks_.emplace_back(name, pass);
    all_pass_ = all_pass_ && pass;
  }

  template <class F>
  void stage(const std::string& name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    timings_.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }

  void write_manifest(const std::string& header) {
    std::ofstream m(out_ / "manifest.txt", std::ios::binary);
    m << header;
    for (const auto& [k, v] : entries_) m << k << '=' << v << '\n';
    for (const auto& [k, v] : timings_) m << "time." << k << '=' << format_double(v) << '\n';
    for (const auto& [k, v] : checks_) m << "check." << k << '=' << (v ? "pass" : "fail") << '\n';
    for (const auto& f : files_) m << "file." << f << '=' << hex64(fnv1a(read_file((out_ / f).string()))) << '\n';
  }

 private:
  fs::path out_;
  std::uint64_t seed_;
  std::size_t workers_;
  bool all_pass_ = true;
  std::vector<std::pair<std::string, std::string>> entries_;
  std::vector<std::pair<std::string, double>> timings_;
  std::vector<std::pair<std::string, bool>> checks_;
  std::vector<std::string> files_;
};

// ---------------------------------------------------------------------------
// Schema helpers

inline std::string join(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s + "]";
}

inline std::string join(const Point& p) {
  std::vector<double> v(p.begin(), p.end());
  return join(v);
}

inline std::string join(const std::vector<std::string>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s + "]";
}

inline ConvexDomain parse_domain(View v) {
  const std::string kind = v.string("kind");
  auto point = [&](const std::string& key) {
    const std::vector<double> c = v.numbers(key);
    if (c.empty() || c.size() > kMaxDim) v.fail(key, "expected 1 to 8 coordinates");
    Point p(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) p[k] = c[k];
    return p;
  };
  std::optional<ConvexDomain> dom;
  try {
    if (kind == "ball") {
      dom = ConvexDomain::ball(point("center"), v.number("radius"));
    } else if (kind == "box") {
      dom = ConvexDomain::box(point("lo"), point("hi"));
    } else if (kind == "polytope") {
      const auto normals = v.rows("normals");
      const auto offsets = v.numbers("offsets");
      if (normals.size() != offsets.size() || normals.empty()) {
        v.fail("offsets", "need one offset per normal");
      }
      std::vector<std::pair<Point, double>> rows;
      for (std::size_t i = 0; i < normals.size(); ++i) {
        if (normals[i].empty() || normals[i].size() > kMaxDim || normals[i].size() != normals[0].size()) {
          v.fail("normals", "rows must all have the same dimension (1 to 8)");
        }
        Point a(normals[i].size());
        for (std::size_t k = 0; k < a.dim(); ++k) a[k] = normals[i][k];
        rows.emplace_back(a, offsets[i]);
      }
      dom = ConvexDomain::polytope(Polytope::from_rows(rows));
    } else {
      v.fail("kind", "expected \"ball\", \"box\" or \"polytope\", got \"" + kind + "\"");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(v.line(), v.path() + ": " + e.what());
  }
  dom->set_name(v.string("name", dom->name()));
  v.finish();
  return *dom;
}

inline Point to_point(View& v, const std::string& key, const std::vector<double>& c, const ConvexDomain& dom) {
  if (c.size() != dom.dim()) {
    v.fail(key, "point has " + std::to_string(c.size()) + " coordinates, domain dimension is " +
                    std::to_string(dom.dim()));
  }
  Point p(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) p[k] = c[k];
  if (!contains(dom, p)) v.fail(key, "point " + to_string(p) + " is outside the domain");
  return p;
}

inline std::vector<Point> parse_points(View& v, const std::string& key, const ConvexDomain& dom,
                                       std::vector<Point> fallback) {
  if (!v.has(key)) return fallback;
  std::vector<Point> out;
  for (const auto& row : v.rows(key)) out.push_back(to_point(v, key, row, dom));
  if (out.empty()) v.fail(key, "needs at least one point");
  return out;
}

inline Point parse_point(View& v, const std::string& key, const ConvexDomain& dom, Point fallback) {
  if (!v.has(key)) return fallback;
  return to_point(v, key, v.numbers(key), dom);
}

inline TestFunction parse_function(View& v, const std::string& key, const std::string& name,
                                   const ConvexDomain& dom) {
  try {
    return make_test_function(name, dom);
  } catch (const std::invalid_argument& e) {
    v.fail(key, e.what());
  }
}

inline std::vector<double> positive_list(View& v, const std::string& key, std::vector<double> fallback) {
  std::vector<double> out = v.numbers(key, std::move(fallback));
  for (double t : out) {
    if (!(t > 0.0)) v.fail(key, "values must be positive");
  }
  return out;
}

inline double positive(View& v, const std::string& key, double fallback) {
  const double x = v.number(key, fallback);
  if (!(x > 0.0)) v.fail(key, "must be positive");
  return x;
}

/// Path parameters from an optional [params]-style table, on top of `base`.
inline PathParams parse_params(std::optional<View> v, PathParams base) {
  if (!v) return base;
  base.step_h = positive(*v, "step_h", base.step_h);
  base.n_paths = v->count("paths", base.n_paths);
  if (base.n_paths == 0) v->fail("paths", "must be positive");
  const std::string scheme = v->string("scheme", scheme_name(base.scheme));
  if (scheme == "reflection") {
    base.scheme = Scheme::kReflection;
  } else if (scheme == "projection") {
    base.scheme = Scheme::kProjection;
  } else {
    v->fail("scheme", "expected \"reflection\" or \"projection\"");
  }
  v->finish();
  return base;
}

inline void record_params(Run& run, const std::string& prefix, const PathParams& p) {
  run.set(prefix + ".step_h", p.step_h);
  run.set(prefix + ".paths", std::to_string(p.n_paths));
  run.set(prefix + ".scheme", scheme_name(p.scheme));
}

inline double default_lambda1(const ConvexDomain& dom) {
  if (const Box* b = dom.as_box()) {
    double l = 0.0;
    for (std::size_t k = 0; k < dom.dim(); ++k) l = std::max(l, b->length(k));
    return std::numbers::pi * std::numbers::pi / (l * l);
  }
  return 0.0;  // unknown: fitted at run time
}

inline std::size_t default_quad_cells(const ConvexDomain& dom) {
  return dom.dim() == 1 ? 20 : dom.dim() == 2 ? 10 : 5;
}

inline void point_header(std::vector<std::string>& h, const std::string& prefix, std::size_t d) {
  for (std::size_t k = 0; k < d; ++k) h.push_back(prefix + std::to_string(k + 1));
}

inline void point_cells(CsvWriter& w, const Point& p) {
  for (double c : p) w.cell(c);
}

// ---------------------------------------------------------------------------
// simulate

inline void run_simulate(Run& run, View& root, const ConvexDomain& dom, const PathParams& base) {
  static const config::Table empty;
  std::optional<View> sv = root.table("simulate");
  View s = sv ? *sv : View(empty, "simulate");
  const Point x0 = parse_point(s, "x0", dom, dom.center());
  const double horizon = positive(s, "horizon", 1.0);
  const std::size_t n = s.count("trajectories", 100);
  const bool dump = s.boolean("dump", false);
  s.finish();
  PathParams p = base;
  p.horizon_T = horizon;
  p.n_paths = n;
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.line_of("horizon"), std::string("simulate: ") + e.what());
  }
  run.set("simulate.x0", join(x0));
  run.set("simulate.horizon", horizon);
  run.set("simulate.trajectories", std::to_string(n));
  run.set("simulate.dump", dump ? "true" : "false");

  run.stage("simulate", [&] {
    std::vector<Trajectory> paths(n);
    parallel_for(n, p.workers, [&](std::size_t i) { paths[i] = simulate(dom, x0, p, i); });
    std::vector<std::string> h{"path", "time"};
    point_header(h, "x", dom.dim());
    h.push_back("local_time");
    CsvWriter ends(run.path("endpoints.csv"), h);
    for (const auto& tr : paths) {
      const RbmState& st = tr.states.back();
      ends.cell(tr.path_index).cell(st.time);
      point_cells(ends, st.position);
      ends.cell(st.local_time).end_row();
    }
    if (dump) {
      std::vector<std::string> th{"path", "step", "time"};
      point_header(th, "x", dom.dim());
      th.push_back("local_time");
      CsvWriter tw(run.path("trajectories.csv"), th);
      for (const auto& tr : paths) {
        for (std::size_t k = 0; k < tr.states.size(); ++k) {
          tw.cell(tr.path_index).cell(static_cast<std::uint64_t>(k)).cell(tr.states[k].time);
          point_cells(tw, tr.states[k].position);
          tw.cell(tr.states[k].local_time).end_row();
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// estimate

inline void run_estimate(Run& run, View& root, const ConvexDomain& dom, const PathParams& base) {
  static const config::Table empty;
  std::optional<View> ev = root.table("estimate");
  View e = ev ? *ev : View(empty, "estimate");
  const std::vector<std::string> estimators = e.strings("estimators", {"semigroup"});
  for (const auto& name : estimators) {
    if (name != "semigroup" && name != "semigroup0" && name != "gradient" && name != "kernel") {
      e.fail("estimators", "unknown estimator '" + name + "' (semigroup, semigroup0, gradient, kernel)");
    }
  }
  std::vector<TestFunction> fs;
  for (const auto& n : e.strings("functions", {"one"})) fs.push_back(parse_function(e, "functions", n, dom));
  const std::vector<Point> points = parse_points(e, "points", dom, {dom.center()});
  const std::vector<double> ts = positive_list(e, "t", {0.1});
  const double fd_step = positive(e, "fd_step", default_fd_step(dom));
  const std::size_t cells = e.count("cells", 50);
  if (cells == 0) e.fail("cells", "must be positive");
  const std::vector<Point> sources = parse_points(e, "sources", dom, points);
  const PathParams p = parse_params(e.table("params"), base);
  e.finish();
  run.set("estimate.estimators", join(estimators));
  {
    std::vector<std::string> names;
    for (const auto& f : fs) names.push_back(f.name);
    run.set("estimate.functions", join(names));
  }
  run.set("estimate.t", join(ts));
  run.set("estimate.fd_step", fd_step);
  run.set("estimate.cells", std::to_string(cells));
  record_params(run, "estimate.params", p);

  std::vector<std::string> h{"estimator", "domain", "t"};
  point_header(h, "x", dom.dim());
  for (const char* c : {"value", "stderr", "M", "h", "seed"}) h.emplace_back(c);
  run.stage("estimate", [&] {
    CsvWriter w(run.path("estimates.csv"), h);
    auto row = [&](const std::string& est, double t, const Point& x, double value, double se, double h_used) {
      w.cell(est).cell(dom.name()).cell(t);
      point_cells(w, x);
      w.cell(value).cell(se).cell(static_cast<std::uint64_t>(p.n_paths)).cell(h_used).cell(run.seed()).end_row();
    };
    for (const auto& est : estimators) {
      for (double t : ts) {
        const double process_t = est == "semigroup0" ? t : 2.0 * t;
        const double h_used = p.with_horizon(process_t).step_h;
        if (est == "kernel") {
          auto grid = std::make_shared<const DomainGrid>(dom, GridSpec::covering(dom, cells));
          for (std::size_t si = 0; si < sources.size(); ++si) {
            const KernelEstimate k = estimate_kernel(dom, sources[si], t, grid, p);
            for (std::size_t c = 0; c < grid->size(); ++c) {
              if (grid->volume(c) <= 0.0) continue;
              row("kernel_s" + std::to_string(si), t, grid->cell_center(c), k.density[c], k.std_error[c], h_used);
            }
          }
          continue;
        }
        for (const auto& f : fs) {
          for (const auto& x : points) {
            if (est == "gradient") {
              const GradientEstimate g = estimate_gradient(dom, f, x, t, fd_step, p);
              for (std::size_t k = 0; k < dom.dim(); ++k) {
                row("gradient_x" + std::to_string(k + 1) + ":" + f.name, t, x, g.vector[k], g.std_error[k], h_used);
              }
            } else {
              const McEstimate m = estimate_semigroup0(dom, f, x, process_t, p);
              row(est + ":" + f.name, t, x, m.mean, m.std_error, h_used);
            }
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// verify

struct CheckOutcome {
  bool pass = false;
  std::size_t violations = 0;
  std::optional<double> exponent, r2, c_fit;
};

inline void write_report(Run& run, const std::string& file, const InequalityReport& r) {
  CsvWriter w(run.path(file), {"inputs", "lhs", "rhs", "lhs_stderr", "rhs_stderr", "margin", "pass"});
  for (const auto& tp : r.points) {
    w.cell(tp.inputs).cell(tp.lhs).cell(tp.rhs).cell(tp.lhs_se).cell(tp.rhs_se).cell(tp.margin()).cell(tp.pass).end_row();
  }
}

inline void write_fit(Run& run, const std::string& file, const PowerLawFit& f) {
  CsvWriter w(run.path(file), {"t", "value", "stderr", "fit"});
  for (std::size_t i = 0; i < f.t.size(); ++i) {
    w.cell(f.t[i]).cell(f.value[i]).cell(i < f.std_error.size() ? f.std_error[i] : 0.0)
        .cell(std::exp(f.log_constant) * std::pow(f.t[i], f.exponent)).end_row();
  }
}

inline std::vector<double> parse_times(View& v, const std::string& what) {
  if (v.has("t")) {
    std::vector<double> ts = positive_list(v, "t", {});
    for (std::size_t i = 1; i < ts.size(); ++i) {
      if (!(ts[i] > ts[i - 1])) v.fail("t", "times must be increasing");
    }
    return ts;
  }
  const std::vector<double> range = v.numbers("t_range");
  if (range.size() != 2 || !(range[0] > 0.0) || !(range[1] > range[0])) {
    v.fail("t_range", what + ": expected [t_min, t_max] with 0 < t_min < t_max");
  }
  const std::size_t n = v.count("n_times", 5);
  if (n < 5) v.fail("n_times", "need at least 5 times");
  return log_spaced(range[0], range[1], n);
}

/// Parses one [verify.<name>] table into a deferred job.
inline std::function<CheckOutcome(Run&)> parse_check(const std::string& name, View c, const ConvexDomain& root_dom,
                                                     const PathParams& root_params, Run& run) {
  const std::string kind = c.string("kind");
  std::optional<View> dv = c.table("domain");
  const ConvexDomain dom = dv ? parse_domain(*dv) : root_dom;
  PathParams p = parse_params(c.table("params"), root_params);
  const std::string pre = "verify." + name;
  run.set(pre + ".kind", kind);
  run.set(pre + ".domain", dom.name());
  const std::string csv = name + ".csv";

  if (kind == "contraction") {
    const std::size_t pairs = c.count("pairs", 1000);
    p.horizon_T = positive(c, "horizon", 1.0);
    c.finish();
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(c.line(), pre + ": " + e.what());
    }
    run.set(pre + ".pairs", std::to_string(pairs));
    run.set(pre + ".horizon", p.horizon_T);
    record_params(run, pre + ".params", p);
    return [=](Run& r) {
      const InequalityReport rep = check_contraction(dom, pairs, p);
      write_report(r, csv, rep);
      return CheckOutcome{rep.passed(), rep.violation_count, {}, {}, {}};
    };
  }
  if (kind == "gradient_commutation" || kind == "variance_bound") {
    std::vector<std::string> names = c.strings("functions", {"cos1_x1"});
    for (const auto& n : names) (void)parse_function(c, "functions", n, dom);
    const double fd_step = positive(c, "fd_step", default_fd_step(dom));
    std::vector<Triple> triples;
    if (c.has("triples")) {
      const std::size_t n = c.count("triples", 20);
      const std::vector<double> range = c.numbers("t_range", {0.02, 0.2});
      if (range.size() != 2 || !(range[0] > 0.0) || !(range[1] > range[0])) {
        c.fail("t_range", "expected [t_min, t_max]");
      }
      triples = sample_triples(dom, names, n, range[0], range[1], run.seed());
    } else {
      std::vector<TestFunction> fs;
      for (const auto& n : names) fs.push_back(make_test_function(n, dom));
      const std::vector<Point> xs = parse_points(c, "points", dom, {dom.center()});
      const std::vector<double> ts = positive_list(c, "t", {0.1});
      triples = cartesian_triples(fs, xs, ts);
    }
    c.finish();
    for (const auto& t : triples) {
      if (!t.f.has_gradient()) throw ConfigError(c.line(), pre + ": '" + t.f.name + "' has no gradient");
    }
    run.set(pre + ".functions", join(names));
    run.set(pre + ".cases", std::to_string(triples.size()));
    run.set(pre + ".fd_step", fd_step);
    record_params(run, pre + ".params", p);
    const bool commutation = kind == "gradient_commutation";
    return [=](Run& r) {
      const InequalityReport rep = commutation ? check_gradient_commutation(dom, triples, p, fd_step)
                                               : check_variance_bound(dom, triples, p, fd_step);
      write_report(r, csv, rep);
      return CheckOutcome{rep.passed(), rep.violation_count, {}, {}, {}};
    };
  }
  if (kind == "ondiagonal_exponent" || kind == "gradient_exponent") {
    const std::vector<double> ts = parse_times(c, pre);
    ExponentOptions opt;
    opt.probes = parse_points(c, "probes", dom, {});
    opt.cell_factor = positive(c, "cell_factor", opt.cell_factor);
    opt.min_steps = c.count("min_steps", opt.min_steps);
    opt.enforce_short_time = c.boolean("short_time", true);
    const double expect = c.number("expect", kind == "ondiagonal_exponent" ? -0.5 * static_cast<double>(dom.dim())
                                                                           : -0.5 * static_cast<double>(dom.dim() + 1));
    const double tol = positive(c, "tol", kind == "ondiagonal_exponent" ? 0.15 : 0.2);
    const double min_r2 = c.number("min_r2", 0.95);
    c.finish();
    const double limit = 0.1 * dom.diameter() * dom.diameter();
    if (opt.enforce_short_time && ts.back() > limit) {
      throw ConfigError(c.line(), pre + ": t = " + format_double(ts.back()) + " exceeds the short-time window " +
                                      format_double(limit) + " (set short_time = false for a negative control)");
    }
    run.set(pre + ".t", join(ts));
    run.set(pre + ".expect", expect);
    run.set(pre + ".tol", tol);
    run.set(pre + ".min_r2", min_r2);
    run.set(pre + ".cell_factor", opt.cell_factor);
    run.set(pre + ".min_steps", std::to_string(opt.min_steps));
    record_params(run, pre + ".params", p);
    const bool ondiag = kind == "ondiagonal_exponent";
    return [=](Run& r) {
      const PowerLawFit f = ondiag ? fit_ondiagonal_exponent(dom, ts, p, opt) : fit_gradient_exponent(dom, ts, p, opt);
      write_fit(r, csv, f);
      const bool pass = std::abs(f.exponent - expect) <= tol && f.r_squared >= min_r2;
      return CheckOutcome{pass, pass ? 0U : 1U, f.exponent, f.r_squared, {}};
    };
  }
  if (kind == "gaussian_tail") {
    const double t = positive(c, "t", 0.02);
    const Point y = parse_point(c, "source", dom, dom.center());
    const std::size_t n = c.count("pairs", 12);
    const double cell_factor = positive(c, "cell_factor", 0.125);
    c.finish();
    run.set(pre + ".t", t);
    run.set(pre + ".source", join(y));
    run.set(pre + ".pairs", std::to_string(n));
    run.set(pre + ".cell_factor", cell_factor);
    record_params(run, pre + ".params", p);
    return [=](Run& r) {
      const auto pairs = tail_pairs(dom, y, t, n);
      const TailFit f = check_gaussian_tail(dom, t, pairs, p, cell_factor);
      std::vector<std::string> h;
      point_header(h, "x", dom.dim());
      point_header(h, "y", dom.dim());
      for (const char* s : {"u", "log_value", "log_stderr", "residual", "noise", "pass"}) h.emplace_back(s);
      CsvWriter w(r.path(csv), h);
      std::size_t bad = 0;
      for (const auto& tp : f.points) {
        point_cells(w, tp.x);
        point_cells(w, tp.y);
        w.cell(tp.u).cell(tp.log_value).cell(tp.log_se).cell(tp.residual).cell(tp.noise).cell(tp.pass).end_row();
        bad += tp.pass ? 0 : 1;
      }
      const bool pass = f.informative && f.pass && f.fitted_c > 0.0;
      return CheckOutcome{pass, bad, {}, {}, f.fitted_c};
    };
  }
  if (kind == "local_time") {
    const std::vector<double> sigmas = c.numbers("sigma", {1.0});
    const std::vector<double> ss = positive_list(c, "s", {0.25, 0.5, 1.0});
    for (double s : ss) {
      if (s > 1.0) c.fail("s", "local-time horizons must be <= 1");
    }
    for (double sg : sigmas) {
      if (sg < 0.0) c.fail("sigma", "must be nonnegative");
    }
    const std::vector<Point> starts = parse_points(c, "starts", dom, {dom.center()});
    c.finish();
    run.set(pre + ".sigma", join(sigmas));
    run.set(pre + ".s", join(ss));
    record_params(run, pre + ".params", p);
    return [=](Run& r) {
      const LocalTimeReport rep = check_local_time_moment(dom, sigmas, ss, starts, p);
      std::vector<std::string> h;
      point_header(h, "start", dom.dim());
      for (const char* s : {"sigma", "s", "moment", "stderr", "reliable"}) h.emplace_back(s);
      CsvWriter w(r.path(csv), h);
      for (const auto& cell : rep.cells) {
        point_cells(w, cell.start);
        w.cell(cell.sigma).cell(cell.s).cell(cell.moment.mean).cell(cell.moment.std_error).cell(cell.reliable).end_row();
      }
      return CheckOutcome{rep.passed(), rep.monotonicity.violation_count, {}, {}, rep.c_fit};
    };
  }
  if (kind == "spectral_decay") {
    const std::string fname = c.string("function", "cos1_x1");
    TestFunction f = parse_function(c, "function", fname, dom);
    if (!f.mean_zero) c.fail("function", "'" + fname + "' does not have zero mean");
    const std::vector<double> ts = positive_list(c, "t", {0.05, 0.1, 0.2});
    double lambda1 = c.number("lambda1", default_lambda1(dom));
    const std::size_t cells = c.count("cells", default_quad_cells(dom));
    const double ratio_tol = c.number("ratio_tol", 0.0);
    c.finish();
    run.set(pre + ".function", fname);
    run.set(pre + ".t", join(ts));
    run.set(pre + ".lambda1", lambda1 > 0.0 ? format_double(lambda1) : "fitted");
    run.set(pre + ".cells", std::to_string(cells));
    run.set(pre + ".ratio_tol", ratio_tol);
    record_params(run, pre + ".params", p);
    return [=](Run& r) {
      const Quadrature quad = Quadrature::on(dom, cells);
      double lam = lambda1;
      if (!(lam > 0.0)) lam = fit_lambda1(dom, f, lambda1_window(dom), quad, p).lambda1;
      const SpectralReport rep = check_spectral_decay(dom, f, ts, lam, quad, p);
      CsvWriter w(r.path(csv), {"t", "norm", "stderr", "bound", "ratio", "lambda1", "pass"});
      bool ratio_ok = true;
      for (std::size_t i = 0; i < rep.curve.size(); ++i) {
        const double bound = std::exp(-lam * rep.curve[i].t) * rep.norm0;
        const double ratio = rep.curve[i].norm / bound;
        if (ratio_tol > 0.0 && std::abs(ratio - 1.0) > ratio_tol) ratio_ok = false;
        w.cell(rep.curve[i].t).cell(rep.curve[i].norm).cell(rep.curve[i].std_error).cell(bound).cell(ratio)
            .cell(lam).cell(rep.report.points[i].pass).end_row();
      }
      return CheckOutcome{rep.report.passed() && ratio_ok, rep.report.violation_count, {}, {}, {}};
    };
  }
  c.fail("kind", "unknown check kind '" + kind +
                     "' (contraction, gradient_commutation, variance_bound, ondiagonal_exponent, "
                     "gradient_exponent, gaussian_tail, local_time, spectral_decay)");
}

inline std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

inline void run_verify(Run& run, View& root, const ConvexDomain& dom, const PathParams& base) {
  std::optional<View> vv = root.table("verify");
  if (!vv) throw ConfigError(root.line(), "verify: missing [verify] section");
  View& v = *vv;
  std::vector<std::string> names = v.strings("checks", {});
  std::vector<std::string> all;
  for (const auto& k : v.keys()) {
    if (k != "checks") all.push_back(k);
  }
  if (names.empty()) names = all;
  std::vector<std::pair<std::string, std::function<CheckOutcome(Run&)>>> jobs;
  for (const auto& k : all) {
    std::optional<View> c = v.table(k);
    auto job = parse_check(k, *c, dom, base, run);
    if (std::find(names.begin(), names.end(), k) != names.end()) jobs.emplace_back(k, std::move(job));
  }
  for (const auto& n : names) {
    if (std::find(all.begin(), all.end(), n) == all.end()) v.fail("checks", "no [verify." + n + "] table");
  }
  v.finish();
  std::ostringstream summary;
  for (auto& [name, job] : jobs) {
    CheckOutcome o;
    run.stage(name, [&] { o = job(run); });
    run.record_check(name, o.pass);
    summary << "check=" << name << " pass=" << (o.pass ? 1 : 0) << " violations=" << o.violations
            << " exponent=" << opt_text(o.exponent) << " r2=" << opt_text(o.r2) << " c_fit=" << opt_text(o.c_fit)
            << '\n';
  }
  std::ofstream(run.path("summary.txt"), std::ios::binary) << summary.str();
}

// ---------------------------------------------------------------------------
// green

inline void run_green(Run& run, View& root, const ConvexDomain& dom, const PathParams& base) {
  std::optional<View> gv = root.table("green");
  if (!gv) throw ConfigError(root.line(), "green: missing [green] section");
  View& g = *gv;
  const std::size_t d = dom.dim();
  std::vector<std::string> h{"op", "domain"};
  point_header(h, "x", d);
  point_header(h, "value", d);
  for (const char* s : {"stderr", "trunc_bound", "q", "ratio"}) h.emplace_back(s);

  struct Job {
    std::string name;
    std::function<void(Run&, CsvWriter&)> body;
  };
  std::vector<Job> jobs;
  for (const auto& key : g.keys()) {
    View c = *g.table(key);
    const std::string pre = "green." + key;
    const std::string op = c.string("op");
    PathParams p = parse_params(c.table("params"), base);
    const double lam_default = default_lambda1(dom);
    const double lambda1 = c.number("lambda1", lam_default);
    if (!(lambda1 > 0.0)) c.fail("lambda1", "required on non-box domains (fit it with a spectral_decay run)");
    GreenParams gp = GreenParams::for_lambda(lambda1, c.count("n_quad", 64));
    gp.t_max = positive(c, "t_max", gp.t_max);
    try {
      gp.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(c.line_of("t_max"), pre + ": " + e.what());
    }
    const double fd_step = positive(c, "fd_step", default_fd_step(dom));
    run.set(pre + ".op", op);
    run.set(pre + ".t_max", gp.t_max);
    run.set(pre + ".n_quad", std::to_string(gp.n_quad));
    run.set(pre + ".lambda1", gp.lambda1_hat);
    run.set(pre + ".fd_step", fd_step);
    record_params(run, pre + ".params", p);
    auto mean_zero_fn = [&](const std::string& k, const std::string& n) {
      TestFunction f = parse_function(c, k, n, dom);
      if (!f.mean_zero) c.fail(k, "'" + n + "' does not have zero mean (try '" + n + "_mz')");
      return f;
    };
    const std::string tag = op + ":" + key;
    auto vec_row = [d, name = dom.name()](CsvWriter& w, const std::string& t, const Point& x, const Point& v,
                                          const Point& se, double trunc, std::optional<double> q,
                                          std::optional<double> ratio) {
      w.cell(t).cell(name);
      point_cells(w, x);
      for (std::size_t k = 0; k < d; ++k) {
        if (k < v.dim()) w.cell(v[k]); else w.empty();
      }
      double m = 0.0;
      for (double s : se) m = std::max(m, s);
      w.cell(m).cell(trunc);
      if (q) w.cell(*q); else w.empty();
      if (ratio) w.cell(*ratio); else w.empty();
      w.end_row();
    };

    if (op == "apply" || op == "gradient" || op == "riesz") {
      const TestFunction f = mean_zero_fn("function", c.string("function", "cos1_x1"));
      const std::vector<Point> xs = parse_points(c, "points", dom, {dom.center()});
      c.finish();
      run.set(pre + ".function", f.name);
      jobs.push_back({key, [=](Run&, CsvWriter& w) {
        for (const Point& x : xs) {
          if (op == "apply") {
            const GreenEstimate e = green_apply(dom, f, x, gp, p);
            vec_row(w, tag, x, Point{e.value}, Point{e.std_error}, e.truncation_bound, {}, {});
          } else if (op == "gradient") {
            const GradientEstimate e = green_gradient(dom, f, x, gp, p, fd_step);
            vec_row(w, tag, x, e.vector, e.std_error,
                    std::exp(-gp.lambda1_hat * gp.t_max) * sup_norm(dom, f.value) / gp.lambda1_hat, {}, {});
          } else {
            const RieszEstimate e = riesz_apply(dom, f, x, gp, p, fd_step);
            vec_row(w, tag, x, e.value, e.std_error, e.truncation_bound + e.remainder_bound, {}, {});
          }
        }
      }});
    } else if (op == "bound") {
      std::vector<TestFunction> fs;
      for (const auto& n : c.strings("functions", {"cos1_x1"})) fs.push_back(mean_zero_fn("functions", n));
      const double q = c.number("q", static_cast<double>(d) + 1.0);
      if (!(q > static_cast<double>(d))) c.fail("q", "must exceed the dimension " + std::to_string(d));
      std::vector<Point> probes = parse_points(c, "points", dom, {});
      if (probes.empty()) {
        const DomainGrid grid(dom, GridSpec::covering(dom, d == 1 ? 11 : 5));
        for (std::size_t i = 0; i < grid.size(); ++i) {
          if (grid.volume(i) > 0.0) probes.push_back(grid.centroid(i));
        }
      }
      c.finish();
      run.set(pre + ".q", q);
      run.set(pre + ".probes", std::to_string(probes.size()));
      jobs.push_back({key, [=](Run& r, CsvWriter& w) {
        const GreenBoundReport rep = check_green_gradient_bound(dom, fs, q, probes, gp, p, fd_step);
        for (const auto& e : rep.entries) {
          vec_row(w, "bound:" + key + ":" + e.f_name, e.argmax, Point{e.max_grad}, Point{e.max_grad_se},
                  e.truncation_bound, q, e.ratio);
        }
        r.record_check(key, rep.pass);
      }});
    } else if (op == "kernel_gradient") {
      const Point y = parse_point(c, "source", dom, dom.center());
      const std::vector<Point> xs = parse_points(c, "points", dom, {});
      if (xs.empty()) c.fail("points", "needs probe points");
      const double cell_width = positive(c, "cell_width", 0.02 * dom.diameter());
      c.finish();
      jobs.push_back({key, [=](Run& r, CsvWriter& w) {
        const GreenKernelProbe pr = green_kernel_gradient_probe(dom, y, xs, gp, p, cell_width);
        for (const auto& pt : pr.points) {
          vec_row(w, tag, pt.x, Point{pt.value}, Point{pt.std_error},
                  std::exp(-gp.lambda1_hat * gp.t_max), {}, {});
        }
        r.record_check(key, pr.slope_ok);
      }});
    } else {
      c.fail("op", "unknown op '" + op + "' (apply, gradient, riesz, bound, kernel_gradient)");
    }
  }
  g.finish();
  CsvWriter w(run.path("green.csv"), h);
  for (auto& j : jobs) run.stage(j.name, [&] { j.body(run, w); });
}

// ---------------------------------------------------------------------------
// entry points

/// Runs one subcommand; returns the exit code. Diagnostics go to `err`.
inline int execute(const Options& opt, std::ostream& err = std::cerr) {
  try {
    std::string text = opt.config_text;
    if (text.empty()) {
      try {
        text = read_file(opt.config_path);
      } catch (const std::exception& e) {
        throw ConfigError(0, e.what());
      }
    }
    const config::Table table = config::parse(text);
    View root(table, "");
    std::uint64_t seed = root.u64("seed", kDefaultSeed);
    if (opt.seed) seed = *opt.seed;
    std::string out = root.string("out", "out");
    if (opt.out) out = *opt.out;
    std::optional<View> dv = root.table("domain");
    if (!dv) throw ConfigError(1, "missing required field 'domain'");
    const ConvexDomain dom = parse_domain(*dv);
    PathParams base;
    base.master_seed = seed;
    base.workers = std::max<std::size_t>(1, opt.workers);
    base = parse_params(root.table("params"), base);

    // parse everything before creating any output
    Run run(out, seed, base.workers);
    run.set("domain", dom.name());
    run.set("domain.dim", std::to_string(dom.dim()));
    record_params(run, "params", base);
    std::function<void()> body;
    if (opt.subcommand == "simulate") {
      body = [&] { run_simulate(run, root, dom, base); };
    } else if (opt.subcommand == "estimate") {
      body = [&] { run_estimate(run, root, dom, base); };
    } else if (opt.subcommand == "verify") {
      body = [&] { run_verify(run, root, dom, base); };
    } else if (opt.subcommand == "green") {
      body = [&] { run_green(run, root, dom, base); };
    } else {
      throw ConfigError(0, "unknown subcommand '" + opt.subcommand + "'");
    }
    // sections of other subcommands may share the file; only ours is read
    for (const char* other : {"simulate", "estimate", "verify", "green"}) {
      if (opt.subcommand != other) (void)root.find(other);
    }
    body();
    root.finish();
    std::ostringstream header;
    header << "tool=rbmlab\nversion=" << kVersion << "\nsubcommand=" << opt.subcommand
           << "\nconfig=" << (opt.config_text.empty() ? opt.config_path : "<inline>")
           << "\nconfig_hash=" << hex64(fnv1a(text)) << "\nseed=" << seed << "\nworkers=" << base.workers
           << "\nout=" << out << '\n';
    run.write_manifest(header.str());
    return run.all_pass() ? 0 : 1;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

inline int run(int argc, char** argv) {
  CLI::App app{"Reflecting Brownian motion and Neumann heat semigroup laboratory", "rbmlab"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1, 1);
  Options opt;
  std::uint64_t seed = 0;
  std::string out;
  for (const char* name : {"simulate", "estimate", "verify", "green"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config_path, "experiment config file")->required();
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory (overrides the config)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  CLI::App* sub = app.get_subcommands().front();
  opt.subcommand = sub->get_name();
  if (sub->count("--seed")) opt.seed = seed;
  if (sub->count("--out")) opt.out = out;
  return execute(opt);
}

}  // namespace rbmlab::cli
