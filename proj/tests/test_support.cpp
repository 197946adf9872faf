#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <cmath>
#include <set>
#include <vector>

#include "rbmlab/csv.hpp"
#include "rbmlab/grid.hpp"
#include "rbmlab/parallel.hpp"
#include "rbmlab/rng.hpp"
#include "rbmlab/stats.hpp"
#include "rbmlab/test_functions.hpp"

using namespace rbmlab;

TEST(Rng, PathStreamsAreReproducibleAndDistinct) {
  PathRng a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  const double x = a.normal();
  EXPECT_EQ(x, b.normal());
  EXPECT_NE(x, c.normal());
  EXPECT_NE(x, d.normal());
}

TEST(Rng, NormalMoments) {
  PathRng r(1, 0);
  std::vector<double> xs(200000);
  for (double& x : xs) x = r.normal();
  const McEstimate m = summarize(xs);
  EXPECT_NEAR(m.mean, 0.0, 4.0 * m.std_error);
  const VarianceEstimate v = sample_variance(xs);
  EXPECT_NEAR(v.variance, 1.0, 4.0 * v.std_error);
}

TEST(Parallel, EveryIndexOnceAnyWorkerCount) {
  for (std::size_t w : {1U, 2U, 7U}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), w, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(Stats, SummarizeKnownValues) {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const McEstimate m = summarize(xs);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.std_error, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
  const std::vector<double> same(10, 0.7);
  EXPECT_EQ(summarize(same).std_error, 0.0);
}

TEST(Stats, LineFitExact) {
  const std::vector<double> x{0.0, 1.0, 2.0}, y{1.0, 3.0, 5.0};
  const LineFit f = fit_line(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-15);
  EXPECT_NEAR(f.intercept, 1.0, 1e-15);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-15);
}

TEST(Stats, KsDistance) {
  EXPECT_EQ(ks_distance({1.0, 2.0}, {1.0, 2.0}), 0.0);
  EXPECT_EQ(ks_distance({0.0, 0.1}, {5.0, 6.0}), 1.0);
}

TEST(Csv, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 0.0, 6.02214076e23}) {
    EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(2.0), "2");
}

TEST(Csv, QuotesFieldsWithCommas) {
  const auto path = std::filesystem::temp_directory_path() / "rbmlab_csv_test.csv";
  {
    CsvWriter w(path.string(), {"a", "b"});
    w.cell("x, y").cell(1.5).end_row();
    w.cell("say \"hi\"").empty().end_row();
  }
  EXPECT_EQ(read_file(path.string()), "a,b\n\"x, y\",1.5\n\"say \"\"hi\"\"\",\n");
}

TEST(Csv, Fnv1aReference) {
  EXPECT_EQ(fnv1a(""), 0xCBF29CE484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xAF63DC4C8601EC8CULL);
  EXPECT_EQ(hex64(0xABCULL), "0000000000000abc");
}

TEST(Grid, CellVolumesSumToDomainVolume) {
  const auto disk = ConvexDomain::unit_disk();
  const DomainGrid g(disk, GridSpec::covering(disk, 20));
  double v = 0.0;
  for (std::size_t c = 0; c < g.size(); ++c) v += g.volume(c);
  EXPECT_NEAR(v, std::numbers::pi, 0.01);
  const Quadrature q = Quadrature::on(ConvexDomain::unit_box(2), 10);
  EXPECT_NEAR(q.total_weight(), 1.0, 1e-12);
}

TEST(Grid, CellOfRoundTrips) {
  const auto sq = ConvexDomain::unit_box(2);
  const DomainGrid g(sq, GridSpec::covering(sq, 8));
  for (std::size_t c = 0; c < g.size(); ++c) EXPECT_EQ(g.cell_of(g.cell_center(c)), c);
  EXPECT_EQ(g.cell_of(Point{2.0, 0.5}), DomainGrid::npos);
}

TEST(TestFunctions, GradientsMatchFiniteDifferences) {
  const auto sq = ConvexDomain::unit_box(2);
  const Point x{0.37, 0.61};
  for (const char* name : {"x1", "centered_x2", "cos3_x2", "bump", "gauss", "r2", "x1x2", "cos1_x1_mz"}) {
    const TestFunction f = make_test_function(name, sq);
    const Point g = f.gradient(x);
    for (std::size_t k = 0; k < 2; ++k) {
      const Point e = Point::unit(2, k) * 1e-6;
      EXPECT_NEAR(g[k], (f(x + e) - f(x - e)) / 2e-6, 1e-6) << name << " axis " << k;
    }
  }
}

TEST(TestFunctions, MeanZeroVariantsHaveZeroMean) {
  const auto disk = ConvexDomain::unit_disk();
  for (const char* name : {"bump_mz", "r2_mz", "x1"}) {
    const TestFunction f = make_test_function(name, disk);
    if (!f.mean_zero) continue;
    EXPECT_NEAR(domain_mean(disk, f.value), 0.0, 1e-3) << name;
  }
  EXPECT_TRUE(make_test_function("cos2_x1", ConvexDomain::unit_box(1)).mean_zero);
  EXPECT_FALSE(make_test_function("x1", ConvexDomain::unit_box(1)).mean_zero);
}

TEST(TestFunctions, UnknownNamesRejected) {
  const auto sq = ConvexDomain::unit_box(2);
  EXPECT_THROW(make_test_function("sin1_x1", sq), UnknownFunction);
  EXPECT_THROW(make_test_function("x3", sq), UnknownFunction);
  EXPECT_THROW(make_test_function("x1x2", ConvexDomain::unit_box(1)), UnknownFunction);
  EXPECT_FALSE(is_known_test_function("cos_x1", sq));
}
