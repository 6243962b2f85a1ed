#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "eulab/illposedness.hpp"

using namespace eulab;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

// R = 1.5 puts the first data bumps above four cells at N = 512.
CompositionParams resolved_params(bool translation) {
  CompositionParams p;
  p.n = 512;
  p.translation = translation;
  return p;
}

GeodesicConfig coarse_geodesic() {
  GeodesicConfig c;
  c.dt = 0.1;
  c.interp = {InterpKind::QuinticSpline, 2};
  c.inversion.interp = c.interp;
  return c;
}

} // namespace

TEST_CASE("separation series bookkeeping", "[illposedness]") {
  SeparationSeries s;
  s.aux_names = {"a"};
  s.rows = {{1, 0.5, 0.3, {1.0}, true}, {2, 0.25, 0.3, {2.0}, false}};
  CHECK_NOTHROW(s.validate());
  CHECK(s.aux(s.rows[1], "a") == 2.0);
  CHECK(s.resolved_rows().size() == 1);
  s.note("R", 0.1);
  s.note("R", 0.2);
  CHECK(s.metadata.size() == 1);
  CHECK(s.meta_number("R") == 0.2);
  s.rows[1].k = 1;
  CHECK_THROWS_AS(s.validate(), std::logic_error);
  s.rows[1] = {2, -1.0, 0.3, {2.0}, true};
  CHECK_THROWS_AS(s.validate(), std::logic_error);
}

TEST_CASE("log-log slope of a power law", "[illposedness]") {
  std::vector<double> x{1, 2, 3, 4}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -1.5));
  CHECK(loglog_slope(x, y) == Approx(-1.5).epsilon(1e-12));
  CHECK_THROWS_AS(loglog_slope({1.0}, {1.0}), std::invalid_argument);
}

TEST_CASE("plateau profile", "[illposedness]") {
  CHECK(plateau_profile(0.3, 0.5) == 1.0);
  CHECK(plateau_profile(1.0, 0.5) == 0.0);
  CHECK(plateau_profile(0.75, 0.5) == Approx(0.5));
  CHECK(plateau_profile(0.6, 0.5) > plateau_profile(0.9, 0.5));
}

TEST_CASE("div-free jet", "[illposedness]") {
  Grid g(2, 64, 8.0);
  auto v = div_free_jet(g, {4, 4, 0}, 2.0, 2.5, 1.0);
  CHECK(sobolev_norm(v, 2.5) == Approx(1.0).epsilon(1e-12));
  CHECK(sobolev_norm(divergence(v), 0.0) < 1e-12);
  const std::size_t c = g.ravel({32, 32, 0});
  CHECK(std::abs(v[1][c]) < 1e-12);
  CHECK(v[0][c] > 0.0);
}

TEST_CASE("composition experiment rejects bad geometry and large R", "[illposedness]") {
  CompositionParams p;
  p.n = 64;
  p.box = 10.0;
  try {
    composition_experiment(0.1, 2, 2.5, p);
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("at least 18.5") != std::string::npos);
  }
  p.box = 20.0;
  CHECK_THROWS_AS(composition_experiment(500.0, 2, 2.5, p), std::invalid_argument);
}

TEST_CASE("composition experiment resolution watermark", "[illposedness]") {
  CompositionParams p;
  p.n = 128;
  auto s = composition_experiment(0.1, 8, 2.5, p);
  CHECK(s.k_resolved == 0);
  CHECK(s.rows.empty());
  CHECK(s.meta_number("M") > 0.0);
  // M / (2L) against four cells of 20/128.
  CHECK(s.meta_number("M") / (2 * s.meta_number("lipschitz")) < 4 * s.meta_number("cell"));
}

TEST_CASE("composition map separates sequences with vanishing input gap", "[illposedness]") {
  const double R = 1.5;
  auto s = composition_experiment(R, 3, 2.5, resolved_params(false));
  REQUIRE(s.k_resolved == 3);
  REQUIRE(s.rows.size() == 3);
  std::vector<double> ks, in;
  for (const auto& r : s.rows) {
    CHECK(r.input_gap == Approx(0.5 * R / r.k).epsilon(1e-12));
    CHECK(s.aux(r, "data_norm") == Approx(0.5 * R).epsilon(1e-12));
    CHECK(s.aux(r, "support_cells") >= 4.0);
    CHECK(r.output_gap >= 0.5 * R * s.meta_number("inv_C"));
    ks.push_back(r.k);
    in.push_back(r.input_gap);
  }
  CHECK(loglog_slope(ks, in) == Approx(-1.0).margin(1e-10));
  double first = s.rows.front().output_gap / s.rows.front().input_gap;
  double last = s.rows.back().output_gap / s.rows.back().input_gap;
  CHECK(last >= 2.5 * first);
}

TEST_CASE("pure translation gives the pythagoras gap", "[illposedness]") {
  // Disjoint translates a, b with |a| = |b| = R/2 are nearly orthogonal, so
  // |a - b| is close to R / sqrt 2.
  const double R = 1.5;
  auto s = composition_experiment(R, 1, 2.5, resolved_params(true));
  REQUIRE(s.rows.size() == 1);
  for (const auto& r : s.rows) {
    CHECK(s.aux(r, "distortion") == Approx(1.0).epsilon(0.01));
    CHECK(s.aux(r, "pythagoras") == Approx(1.0).epsilon(0.02));
    CHECK(r.output_gap / R == Approx(1.0 / std::sqrt(2.0)).epsilon(0.02));
  }
}

TEST_CASE("scaling check", "[illposedness]") {
  Grid g(2, 32, 2 * kPi);
  StepperConfig c;
  c.dt = 1e-2;
  CHECK(scaling_check(VectorField(g), 0.5, 0.5, c) == 0.0);
  auto tg = taylor_green(g);
  CHECK(scaling_check(tg, 0.5, 0.5, c) <= 1e-6);
  std::mt19937_64 rng(3);
  auto u0 = random_div_free(g, rng, 4, 2.0, 3.0, 0.5);
  CHECK(scaling_check(u0, 0.5, 0.5, c) <= 1e-5);
  CHECK(scaling_check(u0, 1.0, 2.0, c) <= 1e-5);
  CHECK(scaling_check(u0, 0.7, 0.7, c) <= 1e-5);
  // T * E_1(T u0) instead of E_1(T u0) / T misses by the factor T^2.
  auto e1 = euler_solve(0.5 * tg, 1.0, c, false).states.back().u;
  CHECK(sobolev_norm(0.5 * e1 - tg, 2.5) / sobolev_norm(tg, 2.5) == Approx(0.75).epsilon(1e-6));
  CHECK_THROWS_AS(scaling_check(tg, 0.5, 0.0, c), std::invalid_argument);
}

TEST_CASE("trajectory covariance", "[illposedness]") {
  Grid g(2, 32, 2 * kPi);
  std::mt19937_64 rng(4);
  auto u0 = random_div_free(g, rng, 4, 2.0, 3.0, 0.5);
  StepperConfig c;
  c.dt = 1e-2;
  for (double lam : {0.3, 0.5, 2.0, 3.0}) CHECK(trajectory_covariance(u0, 1.0, lam, c) <= 1e-6);
}

TEST_CASE("dexp at zero is the identity to second order", "[illposedness]") {
  Grid g(2, 32, 2 * kPi);
  std::mt19937_64 rng(5);
  auto v = random_div_free(g, rng, 3, 2.0, 3.0, 1.0);
  auto cfg = coarse_geodesic();
  std::vector<double> eps{1e-2, 5e-3, 2.5e-3}, err;
  for (double e : eps) err.push_back(sobolev_norm(dexp_fd(VectorField(g), v, e, cfg) - v, 2.0));
  CHECK(err.front() < 1e-3 * sobolev_norm(v, 2.0));
  CHECK(loglog_slope(eps, err) == Approx(2.0).margin(0.2));
  // Linear in v up to the O(eps^2) remainder.
  auto a = dexp_fd(VectorField(g), 2.0 * v, 1e-2, cfg);
  auto b = dexp_fd(VectorField(g), v, 1e-2, cfg);
  CHECK(sobolev_norm(a - 2.0 * b, 2.0) <= 1e-2 * sobolev_norm(a, 2.0));
  CHECK_THROWS_AS(dexp_fd(VectorField(g), v, 0.0, cfg), std::invalid_argument);
}

TEST_CASE("dexp richardson ratio", "[illposedness]") {
  Grid g(2, 16, 2 * kPi);
  std::mt19937_64 rng(6);
  auto v = random_div_free(g, rng, 3, 2.0, 3.0, 1.0);
  auto u0 = random_div_free(g, rng, 3, 2.0, 3.0, 0.3);
  auto cfg = coarse_geodesic();
  auto ok = dexp_richardson(u0, v, 0.1, 2.0, cfg);
  CHECK(ok.ratio == Approx(4.0).margin(1.0));
  CHECK_FALSE(ok.roundoff_suspect);
  auto tiny = dexp_richardson(u0, v, 1e-9, 2.0, cfg);
  CHECK(tiny.roundoff_suspect);
}

TEST_CASE("compact approximation", "[illposedness]") {
  Grid g(2, 64, 20.0);
  auto u = taylor_green(g, 0.2);
  const Point c{5, 5, 0};
  auto ub = compact_approximation(u, c, 4.0, 0.4);
  CHECK(sobolev_norm(divergence(ub), 1.5) < 1e-12);
  // Spectral mollification leaves a small tail outside the window.
  double outside = 0.0, inside = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    double r = periodic_distance(g, g.position(p), c);
    double m = std::hypot(ub[0][p], ub[1][p]);
    if (r > 4.4 + 2 * g.spacing()) outside = std::max(outside, m);
    if (r < 1.5) inside = std::max(inside, std::abs(m - std::hypot(u[0][p], u[1][p])));
  }
  CHECK(outside < 1e-2 * ub.max_length());
  CHECK(inside < 0.02);
  CHECK_THROWS_AS(compact_approximation(u, c, 6.0, 0.4), std::invalid_argument);
}

TEST_CASE("solution map experiment flags unresolved swirls", "[illposedness]") {
  Grid g(2, 32, 25.0);
  SolutionMapParams p;
  p.stepper.dt = 0.05;
  p.geodesic = coarse_geodesic();
  p.geodesic.dt = 0.25;
  auto s = solution_map_experiment(taylor_green(g, 0.2), 0.1, 2, 2.5, p);
  CHECK(s.k_resolved == 0);
  CHECK(s.rows.empty());
  CHECK(s.meta_number("M") > 0.0);
  CHECK(s.meta_number("support_distance") > 0.0);
  CHECK(s.meta_number("remote_influence") < 1e-3 * 0.2);

  p.keep_unresolved = true;
  auto t = solution_map_experiment(taylor_green(g, 0.2), 0.1, 2, 2.5, p);
  REQUIRE(t.rows.size() == 2);
  for (const auto& r : t.rows) {
    CHECK_FALSE(r.resolved);
    CHECK(r.input_gap == Approx(0.1 / (4 * r.k)).epsilon(1e-10));
    CHECK(t.aux(r, "rho_used") == Approx(4 * g.spacing()));
    CHECK(r.output_gap > 0.0);
  }

  auto bad = VectorField::sample(g, [](const Point& x) { return Point{std::sin(x[0] * 2 * kPi / 25.0), 0, 0}; });
  CHECK_THROWS_AS(solution_map_experiment(bad, 0.1, 2, 2.5, p), std::invalid_argument);
}
