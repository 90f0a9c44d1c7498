#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mlink/rng.hpp"
#include "mlink/selection.hpp"
#include "test_util.hpp"

using namespace mlink;
using test::pt;

namespace {

PointSet points_on_line(int n, double y = 0.0, double x0 = 0.0, double x1 = 1.0) {
  PointSet ps;
  for (int i = 0; i < n; ++i)
    ps.points.push_back(pt(x0 + (x1 - x0) * i / (n - 1), y));
  return ps;
}

std::vector<int> iota_n(int n, int offset = 0) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = offset + i;
  return idx;
}

}  // namespace

TEST_SUITE_BEGIN("selection");

TEST_CASE("gric hand values: complexity terms with zero residuals") {
  const GricConfig cfg{1.0, 2.0, 0.1};

  // 10 points exactly on a line: 0 + 1*1*10 + 2*2 = 14
  const PointSet on_line = points_on_line(10);
  const auto line = line_class().fit_cluster(on_line, iota_n(10));
  CHECK(gric_score(on_line, iota_n(10), line_class(), line, cfg) ==
        doctest::Approx(14.0).epsilon(1e-9));

  // 10 points exactly on a circle: 0 + 1*1*10 + 2*3 = 16
  PointSet on_circle;
  for (int i = 0; i < 10; ++i) {
    const double t = 2.0 * M_PI * i / 10.0;
    on_circle.points.push_back(pt(std::cos(t), std::sin(t)));
  }
  const auto circle = circle_class().fit_cluster(on_circle, iota_n(10));
  CHECK(gric_score(on_circle, iota_n(10), circle_class(), circle, cfg) ==
        doctest::Approx(16.0).epsilon(1e-9));
}

TEST_CASE("the robust loss saturates at (r - d)^2 per point") {
  const GricConfig cfg{1.0, 2.0, 0.01};
  ModelInstance line;
  line.class_id = "line";
  line.params = Eigen::Vector3d(0, 1, 0);
  PointSet one;
  one.points = {pt(0, 5.0)};  // 500 sigma away
  const double g = gric_score(one, iota_n(1), line_class(), line, cfg);
  CHECK(g == doctest::Approx(1.0 + 1.0 + 4.0).epsilon(1e-12));
  one.points = {pt(0, 0.01)};  // exactly at sigma: not capped, rho = 1
  CHECK(gric_score(one, iota_n(1), line_class(), line, cfg) ==
        doctest::Approx(6.0).epsilon(1e-12));
  one.points = {pt(0, 0.005)};  // half sigma: rho^2 = 0.25
  CHECK(gric_score(one, iota_n(1), line_class(), line, cfg) ==
        doctest::Approx(5.25).epsilon(1e-12));
}

TEST_CASE("gric is permutation-invariant and monotone under growth") {
  Rng rng(3);
  PointSet data;
  for (int i = 0; i < 20; ++i)
    data.points.push_back(pt(rng.uniform(0, 1), rng.uniform(0, 1)));
  ModelInstance line;
  line.class_id = "line";
  line.params = Eigen::Vector3d(0, 1, 0.5);
  const GricConfig cfg{1.0, 2.0, 0.05};

  auto idx = iota_n(20);
  const double g = gric_score(data, idx, line_class(), line, cfg);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(idx.begin(), idx.end(),
                 std::mt19937(static_cast<unsigned>(t)));
    CHECK(gric_score(data, idx, line_class(), line, cfg) == doctest::Approx(g));
  }

  // adding a point under a fixed model adds lambda1*d plus a nonnegative term
  for (int n = 2; n < 20; ++n) {
    const double before = gric_score(data, iota_n(n), line_class(), line, cfg);
    const double after = gric_score(data, iota_n(n + 1), line_class(), line, cfg);
    CHECK(after >= before + cfg.lambda1 * 1.0 - 1e-12);
  }
}

TEST_CASE("merge test: collinear noise-free segments merge as a line") {
  const std::vector<ModelClassSpec> classes{line_class(), circle_class()};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(77, seed));
    PointSet data;
    const double y = rng.uniform(-1, 1);
    for (int i = 0; i < 30; ++i) data.points.push_back(pt(rng.uniform(0.0, 0.4), y));
    for (int i = 0; i < 30; ++i) data.points.push_back(pt(rng.uniform(0.6, 1.0), y));
    const GricConfig cfg{1.0, 2.0, 0.0075};
    const auto v = evaluate_merge(data, iota_n(30), iota_n(30, 30), classes, cfg);
    CHECK(v.accept);
    CHECK(v.winning_class == "line");
    // the union fit saves one parameter penalty: n+4 vs n+8
    for (const auto& s : v.scores)
      if (s.class_id == "line") {
        CHECK(s.g_union == doctest::Approx(30 + 30 + 4).epsilon(1e-9));
        CHECK(s.g_u + s.g_v == doctest::Approx(30 + 30 + 8).epsilon(1e-9));
      }
  }
}

TEST_CASE("merge test: parallel segments far apart are rejected") {
  const std::vector<ModelClassSpec> classes{line_class()};
  const double sigma = 0.01;  // gric scale; the segments sit 20 sigma apart
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(78, seed));
    PointSet data;
    const double y0 = rng.uniform(-0.5, 0.5);
    for (int i = 0; i < 30; ++i) data.points.push_back(pt(rng.uniform(0, 1), y0));
    for (int i = 0; i < 30; ++i)
      data.points.push_back(pt(rng.uniform(0, 1), y0 + 20.0 * sigma));
    const GricConfig cfg{1.0, 2.0, sigma};
    const auto v = evaluate_merge(data, iota_n(30), iota_n(30, 30), classes, cfg);
    CHECK_FALSE(v.accept);
  }
}

TEST_CASE("merge test: two arcs of one circle merge as a circle") {
  const std::vector<ModelClassSpec> classes{line_class(), circle_class()};
  const double noise = 0.005;
  const GricConfig cfg{1.0, 2.0, 1.5 * noise};  // eps = 3 sigma_noise convention
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(79, seed));
    PointSet data;
    const double cx = rng.uniform(-0.2, 0.2), cy = rng.uniform(-0.2, 0.2);
    const double r = 0.2;
    for (int i = 0; i < 30; ++i) {
      const double t = rng.uniform(-M_PI / 4, M_PI / 4);
      data.points.push_back(pt(cx + (r + rng.normal(0, noise)) * std::cos(t),
                               cy + (r + rng.normal(0, noise)) * std::sin(t)));
    }
    for (int i = 0; i < 30; ++i) {
      const double t = M_PI + rng.uniform(-M_PI / 4, M_PI / 4);
      data.points.push_back(pt(cx + (r + rng.normal(0, noise)) * std::cos(t),
                               cy + (r + rng.normal(0, noise)) * std::sin(t)));
    }
    const auto v = evaluate_merge(data, iota_n(30), iota_n(30, 30), classes, cfg);
    CHECK(v.accept);
    CHECK(v.winning_class == "circle");
  }
}

TEST_CASE("evaluate_merge is symmetric in its cluster arguments") {
  Rng rng(101);
  const std::vector<ModelClassSpec> classes{line_class(), circle_class(),
                                            parabola_class()};
  const GricConfig cfg{1.0, 2.0, 0.02};
  for (int trial = 0; trial < 30; ++trial) {
    PointSet data;
    for (int i = 0; i < 12; ++i)
      data.points.push_back(pt(rng.uniform(0, 1), rng.uniform(0, 1)));
    const auto u = iota_n(6);
    const auto v = iota_n(6, 6);
    MergeVerdict ab, ba;
    try {
      ab = evaluate_merge(data, u, v, classes, cfg);
      ba = evaluate_merge(data, v, u, classes, cfg);
    } catch (const NoFittableClass&) {
      continue;
    }
    CHECK(ab.accept == ba.accept);
    CHECK(ab.winning_class == ba.winning_class);
  }
}

TEST_CASE("merge decisions are invariant under joint rescaling") {
  Rng rng(55);
  const std::vector<ModelClassSpec> classes{line_class(), circle_class()};
  for (int trial = 0; trial < 40; ++trial) {
    PointSet data;
    // two noisy segments at a random gap: decisions vary across trials
    const double gap = rng.uniform(0.0, 0.08);
    for (int i = 0; i < 15; ++i)
      data.points.push_back(pt(rng.uniform(0, 1), rng.normal(0.0, 0.01)));
    for (int i = 0; i < 15; ++i)
      data.points.push_back(pt(rng.uniform(0, 1), gap + rng.normal(0.0, 0.01)));
    const GricConfig cfg{1.0, 2.0, 0.015};
    const auto base = evaluate_merge(data, iota_n(15), iota_n(15, 15), classes, cfg);

    for (const double s : {3.7, 0.043}) {
      PointSet scaled;
      for (const auto& p : data.points) scaled.points.push_back(p * s);
      const GricConfig scfg{1.0, 2.0, 0.015 * s};
      const auto v =
          evaluate_merge(scaled, iota_n(15), iota_n(15, 15), classes, scfg);
      CHECK(v.accept == base.accept);
      CHECK(v.winning_class == base.winning_class);
    }
  }
}

TEST_CASE("no fittable class raises and unavailable classes cannot veto") {
  const std::vector<ModelClassSpec> classes{circle_class()};
  PointSet data;  // two collinear triples: circles degenerate everywhere
  for (int i = 0; i < 6; ++i) data.points.push_back(pt(i, 2.0 * i));
  const GricConfig cfg{1.0, 2.0, 0.01};
  CHECK_THROWS_AS((void)evaluate_merge(data, iota_n(3), iota_n(3, 3), classes, cfg),
                  NoFittableClass);

  // with a line available the degenerate circle is excluded from both sides
  const std::vector<ModelClassSpec> both{line_class(), circle_class()};
  const auto v = evaluate_merge(data, iota_n(3), iota_n(3, 3), both, cfg);
  CHECK(v.accept);
  CHECK(v.winning_class == "line");
  for (const auto& s : v.scores)
    if (s.class_id == "circle") CHECK_FALSE(s.available);
}

TEST_SUITE_END();
