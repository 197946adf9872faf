// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rbmlab/cli.hpp"
#include "rbmlab/green.hpp"
#include "rbmlab/semigroup.hpp"
#include "rbmlab/verify.hpp"
#include "support/oracles.hpp"

using namespace rbmlab;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = oracle::kPi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

PathParams params(std::size_t m, double h = 1e-3) {
  PathParams p;
  p.n_paths = m;
  p.step_h = h;
  return p;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const ConvexDomain kInterval = ConvexDomain::unit_box(1);
const ConvexDomain kSquare = ConvexDomain::unit_box(2);
const ConvexDomain kDisk = ConvexDomain::unit_disk();

ConvexDomain pentagon() {
  std::vector<std::pair<Point, double>> rows;
  for (int i = 0; i < 5; ++i) {
    const double a = 2.0 * kPi * i / 5.0;
    rows.emplace_back(Point{std::cos(a), std::sin(a)}, 1.0);
  }
  return ConvexDomain::polytope(Polytope::from_rows(rows));
}

// exponent fits shared between criteria 5, 6 and 7
const std::vector<double> kSquareTimes = log_spaced(0.002, 0.02, 5);
const std::vector<double> kIntervalTimes = log_spaced(0.005, 0.05, 5);

const PowerLawFit& square_ondiagonal() {
  static const PowerLawFit f = fit_ondiagonal_exponent(kSquare, kSquareTimes, params(500'000));
  return f;
}
const PowerLawFit& square_gradient() {
  static const PowerLawFit f = fit_gradient_exponent(kSquare, kSquareTimes, params(200'000));
  return f;
}
const PowerLawFit& interval_ondiagonal() {
  static const PowerLawFit f = fit_ondiagonal_exponent(kInterval, kIntervalTimes, params(200'000));
  return f;
}
const PowerLawFit& interval_gradient() {
  static const PowerLawFit f = fit_gradient_exponent(kInterval, kIntervalTimes, params(200'000));
  return f;
}

Outcome c1_oracle_semigroup() {
  const TestFunction f = make_test_function("cos1_x1", kInterval);
  const auto start = std::chrono::steady_clock::now();
  Outcome o{true, ""};
  double worst = 0.0;
  for (double x : {0.0, 0.2, 0.5, 0.7, 1.0}) {
    const McEstimate m = estimate_semigroup(kInterval, f, Point{x}, 0.1, params(200'000));
    const double exact = std::exp(-kPi * kPi * 0.1) * std::cos(kPi * x);
    const double z = std::abs(m.mean - exact) / m.std_error;
    worst = std::max(worst, z);
    if (z > 3.0) o.pass = false;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs >= 60.0) o.pass = false;
  o.detail = fmt("max |err|/stderr = %.2f, %.1f s", worst, secs);
  return o;
}

Outcome c2_oracle_kernel() {
  const KernelEstimate k =
      estimate_kernel(kInterval, Point{0.5}, 0.05, GridSpec::covering(kInterval, 100), params(200'000));
  const std::size_t c = k.grid->cell_of(Point{0.5});
  const double exact = oracle::interval_kernel(0.05, 0.5, 0.5);
  const double err = std::abs(k.density[c] - exact);
  const double allowed = 3.0 * (k.std_error[c] + k.binning_bound(c));
  return {err <= allowed, fmt("density %.4f, series %.4f, |err| %.4f <= %.4f", k.density[c], exact, err, allowed)};
}

Outcome c3_contraction() {
  const PathParams p = params(1, 1e-4).with_horizon(1.0);
  const InequalityReport r = check_contraction(kDisk, 1000, p);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& tp : r.points) worst = std::max(worst, tp.lhs);
  return {r.passed() && r.points.size() == 1000 && p.n_steps() == 10'000,
          fmt("%zu pairs x %zu steps, %zu expansions, largest step growth %.3g", r.points.size(), p.n_steps(),
              r.violation_count, worst)};
}

Outcome c4_conservation() {
  Outcome o{true, ""};
  for (const auto& dom : {kDisk, kSquare, pentagon()}) {
    const McEstimate m = estimate_semigroup(dom, make_test_function("one", dom), dom.center(), 0.1, params(2000));
    if (m.mean != 1.0 || m.std_error != 0.0) o.pass = false;
    o.detail += fmt("%s: %.17g +- %g  ", dom.name().c_str(), m.mean, m.std_error);
  }
  return o;
}

Outcome c5_ondiagonal() {
  const auto start = std::chrono::steady_clock::now();
  const PowerLawFit& f = square_ondiagonal();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::abs(f.exponent + 1.0) <= 0.15 && f.r_squared >= 0.95 && secs < 600.0,
          fmt("exponent %.4f, r2 %.4f, %.1f s", f.exponent, f.r_squared, secs)};
}

Outcome c6_gradient() {
  const PowerLawFit& f = interval_gradient();
  double worst = 0.0;
  for (std::size_t i = 0; i < f.t.size(); ++i) {
    const double exact = oracle::interval_kernel_dx_sup(f.t[i]);
    worst = std::max(worst, std::abs(f.value[i] - exact) / exact);
  }
  return {std::abs(f.exponent + 1.0) <= 0.2 && worst <= 0.2,
          fmt("exponent %.4f, r2 %.4f, worst relative error vs series %.3f", f.exponent, f.r_squared, worst)};
}

Outcome c7_gap() {
  const double gi = interval_gradient().exponent - interval_ondiagonal().exponent;
  const double gs = square_gradient().exponent - square_ondiagonal().exponent;
  return {std::abs(gi + 0.5) <= 0.2 && std::abs(gs + 0.5) <= 0.2,
          fmt("interval %.4f, square %.4f", gi, gs)};
}

Outcome c8_variance_and_commutation() {
  struct Case {
    const ConvexDomain* dom;
    std::vector<std::string> names;
  };
  const std::vector<Case> cases{{&kInterval, {"cos1_x1", "cos2_x1", "gauss", "bump"}},
                                {&kSquare, {"cos1_x1", "x1x2", "gauss", "bump"}},
                                {&kDisk, {"x1", "r2", "gauss", "bump"}}};
  Outcome o{true, ""};
  for (const Case& c : cases) {
    const auto triples = sample_triples(*c.dom, c.names, 20, 0.01, 0.5, 17);
    const InequalityReport gg = check_gradient_commutation(*c.dom, triples, params(10'000));
    const InequalityReport pv = check_variance_bound(*c.dom, triples, params(10'000));
    if (!gg.passed() || !pv.passed() || gg.points.size() != 20) o.pass = false;
    o.detail += fmt("%s: commutation %zu, variance %zu violations  ", c.dom->name().c_str(), gg.violation_count,
                    pv.violation_count);
  }
  return o;
}

Outcome c9_tail() {
  const auto pairs = tail_pairs(kInterval, Point{0.5}, 0.02, 12);
  const TailFit f = check_gaussian_tail(kInterval, 0.02, pairs, params(200'000));
  return {f.informative && f.fitted_c > 0.0 && f.pass,
          fmt("c %.4f over %zu pairs (%zu excluded)", f.fitted_c, f.points.size(), f.n_excluded)};
}

Outcome c10_local_time() {
  const std::vector<double> sig{1.0}, s{0.25, 0.5, 1.0};
  const std::vector<Point> starts{Point{0.0, 0.0}, Point{0.9, 0.0}};
  const LocalTimeReport r = check_local_time_moment(kDisk, sig, s, starts, params(4000, 1e-4));
  std::string moments;
  for (const auto& c : r.cells) moments += fmt("%.3f ", c.moment.mean);
  return {r.passed(), fmt("c %.4f, moments %s", r.c_fit, moments.c_str())};
}

Outcome c11_spectral() {
  const TestFunction f = make_test_function("cos1_x1", kInterval);
  const Quadrature q = Quadrature::on(kInterval, 20);
  const std::vector<double> ts{0.05, 0.1, 0.2};
  const auto curve = l2_norm_curve(kInterval, f, ts, q, params(20'000));
  const double n0 = l2_norm(q, f);
  Outcome o{true, "ratio/exp(-pi^2 t):"};
  for (const L2Point& c : curve) {
    const double rel = c.norm / n0 / std::exp(-kPi * kPi * c.t);
    if (std::abs(rel - 1.0) > 0.05) o.pass = false;
    o.detail += fmt(" %.4f", rel);
  }
  return o;
}

Outcome c12_green() {
  const TestFunction f = make_test_function("cos1_x1", kInterval);
  const GreenParams gp = GreenParams::for_lambda(kPi * kPi);
  const GreenEstimate u0 = green_apply(kInterval, f, Point{0.0}, gp, params(20'000));
  const bool u_ok = std::abs(u0.value - oracle::green_u(0.0)) <= 3.0 * (u0.std_error + u0.truncation_bound);
  double sup = 0.0;
  for (double x : {0.3, 0.4, 0.5, 0.6, 0.7}) {
    sup = std::max(sup, std::abs(green_gradient(kInterval, f, Point{x}, gp, params(20'000)).vector[0]));
  }
  const bool sup_ok = std::abs(sup - 1.0 / kPi) <= 0.05 / kPi;
  const std::vector<TestFunction> fs{f};
  const std::vector<Point> probes{Point{0.3}, Point{0.5}, Point{0.7}};
  const GreenBoundReport b = check_green_gradient_bound(kInterval, fs, 2.0, probes, gp, params(20'000));
  const double ratio = b.entries.at(0).ratio;
  const bool ratio_ok = std::abs(ratio - std::sqrt(2.0) / kPi) <= 0.05 * std::sqrt(2.0) / kPi;
  return {u_ok && sup_ok && ratio_ok,
          fmt("u(0) %.5f (exact %.5f), sup|u'| %.4f (exact %.4f), ratio %.4f (exact %.4f)", u0.value,
              oracle::green_u(0.0), sup, 1.0 / kPi, ratio, std::sqrt(2.0) / kPi)};
}

Outcome c13_riesz() {
  const TestFunction f = make_test_function("cos1_x1", kInterval);
  const RieszEstimate r =
      riesz_apply(kInterval, f, Point{0.5}, GreenParams::for_lambda(kPi * kPi), params(20'000));
  return {std::abs(r.value[0] + 2.0) <= 0.1, fmt("Tf(0.5) = %.4f +- %.4f", r.value[0], r.std_error[0])};
}

std::map<std::string, std::string> run_cli(const std::string& sub, const std::string& cfg, std::size_t workers) {
  const fs::path out = fs::temp_directory_path() / ("rbmlab_acceptance_" + sub + "_" + std::to_string(workers));
  fs::remove_all(out);
  cli::Options o;
  o.subcommand = sub;
  o.config_text = cfg;
  o.workers = workers;
  o.out = out.string();
  std::ostringstream err;
  if (cli::execute(o, err) == 2) throw std::runtime_error("config rejected: " + err.str());
  std::map<std::string, std::string> csvs;
  for (const auto& e : fs::directory_iterator(out)) {
    if (e.path().extension() == ".csv") csvs[e.path().filename().string()] = read_file(e.path().string());
  }
  fs::remove_all(out);
  return csvs;
}

Outcome c14_determinism() {
  const std::string interval = "seed = 11\ndomain = { kind = \"box\", lo = [0.0], hi = [1.0] }\n";
  const std::string disk = "seed = 11\ndomain = { kind = \"ball\", center = [0.0, 0.0], radius = 1.0 }\n";
  const std::vector<std::pair<std::string, std::string>> runs{
      {"simulate", disk + "[params]\npaths = 50\n[simulate]\nx0 = [0.5, 0.0]\nhorizon = 0.5\n"
                          "trajectories = 50\ndump = true\n"},
      {"estimate", interval + "[params]\npaths = 20000\n[estimate]\n"
                              "estimators = [\"semigroup\", \"gradient\", \"kernel\"]\n"
                              "functions = [\"cos1_x1\"]\npoints = [[0.0], [0.2], [0.5]]\nt = [0.1]\n"
                              "cells = 100\nsources = [[0.5]]\n"},
      {"verify", disk + "[params]\npaths = 2000\n"
                        "[verify.commutation]\nkind = \"gradient_commutation\"\nfunctions = [\"x1\", \"r2\"]\n"
                        "points = [[0.1, 0.2], [0.7, 0.0]]\nt = [0.1]\n"
                        "[verify.contraction]\nkind = \"contraction\"\npairs = 50\nhorizon = 0.2\n"},
      {"green", interval + "[params]\npaths = 2000\n"
                           "[green.u]\nop = \"apply\"\nfunction = \"cos1_x1\"\npoints = [[0.0], [0.5]]\n"
                           "[green.t]\nop = \"riesz\"\nfunction = \"cos1_x1\"\npoints = [[0.5]]\n"}};
  Outcome o{true, ""};
  std::size_t files = 0;
  for (const auto& [sub, cfg] : runs) {
    const auto a = run_cli(sub, cfg, 1);
    const auto b = run_cli(sub, cfg, 4);
    if (a.empty() || a != b) {
      o.pass = false;
      o.detail += sub + " differs; ";
    }
    files += a.size();
  }
  o.detail += fmt("%zu CSV files compared across 1 and 4 workers", files);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle_semigroup", c1_oracle_semigroup},
      {"oracle_kernel", c2_oracle_kernel},
      {"exact_contraction", c3_contraction},
      {"conservation", c4_conservation},
      {"ondiagonal_exponent", c5_ondiagonal},
      {"gradient_exponent", c6_gradient},
      {"exponent_gap", c7_gap},
      {"variance_and_commutation", c8_variance_and_commutation},
      {"gaussian_tail", c9_tail},
      {"local_time_moments", c10_local_time},
      {"spectral_decay", c11_spectral},
      {"green_oracle", c12_green},
      {"riesz_oracle", c13_riesz},
      {"determinism", c14_determinism}};
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::strtoul(argv[i], nullptr, 10));
  std::size_t failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%-4s %-26s %s  %s [%.1f s]\n", ("C" + std::to_string(i + 1)).c_str(), criteria[i].first.c_str(),
                o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%zu criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
