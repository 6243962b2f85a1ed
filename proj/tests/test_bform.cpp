#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "eulab/bform.hpp"

using namespace eulab;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

ScalarField laplacian(const ScalarField& f) {
  ScalarField out(f.grid());
  for (int d = 0; d < f.grid().dim(); ++d) out += partial_derivative(partial_derivative(f, d), d);
  return out;
}

ScalarField velocity_gradient_contraction(const VectorField& u) {
  MatrixField du = jacobian(u);
  ScalarField acc(u.grid());
  for (int i = 0; i < u.dim(); ++i)
    for (int k = 0; k < u.dim(); ++k) acc += dealiased_product(du(k, i), du(i, k));
  return acc;
}

VectorField dealias(const VectorField& u) {
  std::vector<ScalarField> c;
  for (const auto& f : u.components()) c.push_back(eulab::dealias(f));
  return VectorField(std::move(c));
}

} // namespace

TEST_CASE("B vanishes on zero and is quadratic", "[bform]") {
  Grid g(2, 32, 2 * kPi);
  BAssembly b;
  CHECK(b.b(VectorField(g)).max_abs() == 0.0);
  std::mt19937_64 rng(1);
  auto u = dealias(random_div_free(g, rng, 6));
  auto b1 = b.b(u);
  auto b3 = b.b(3.0 * u);
  CHECK((b3 - 9.0 * b1).max_abs() <= 1e-12 * b3.max_abs());
  CHECK((b.b_bilinear(u, u) - b1).max_abs() <= 1e-12 * b1.max_abs());
}

TEST_CASE("taylor-green pressure", "[bform]") {
  // For u = (sin x cos y, -cos x sin y): p = (cos 2x + cos 2y)/4, so B = -p.
  Grid g(2, 32, 2 * kPi);
  auto u = taylor_green(g);
  BAssembly b;
  auto want = ScalarField::sample(g, [](const Point& x) { return -(std::cos(2 * x[0]) + std::cos(2 * x[1])) / 4; });
  CHECK((b.b(u) - want).max_abs() < 1e-13);
  std::ostringstream warn;
  auto p = b.pressure_from(u, 1e-8, &warn);
  CHECK((p + want).max_abs() < 1e-13);
  CHECK(warn.str().empty());
}

TEST_CASE("pressure_from warns on divergent input", "[bform]") {
  Grid g(2, 16, 2 * kPi);
  auto u = VectorField::sample(g, [](const Point& x) { return Point{std::sin(x[0]), 0, 0}; });
  std::ostringstream warn;
  BAssembly().pressure_from(u, 1e-8, &warn);
  CHECK(warn.str().find("div u") != std::string::npos);
}

TEST_CASE("B1 lives in the low band, B2 in the high band", "[bform]") {
  std::mt19937_64 rng(2);
  Grid g(2, 32, 8.0);
  auto u = dealias(random_div_free(g, rng, 8));
  for (double r : {1.0, 2.5}) {
    BAssembly b(r);
    CHECK(max_coefficient_outside(b.b1(u), r) == 0.0);
    CHECK(max_coefficient_inside(b.b2(u), r) == 0.0);
  }
  CHECK_THROWS_AS(BAssembly(0.0), std::invalid_argument);
}

TEST_CASE("poisson identity for divergence-free fields", "[bform]") {
  std::mt19937_64 rng(3);
  for (int dim : {2, 3}) {
    Grid g(dim, dim == 2 ? 32 : 16, 2 * kPi);
    for (double r : {1.0, 2.0}) {
      auto u = dealias(random_div_free(g, rng, 4));
      BAssembly b(r);
      ScalarField rhs = velocity_gradient_contraction(u);
      Spectrum c = rhs.spectrum();
      c[0] = 0.0;
      rhs = ScalarField::from_spectrum(g, c);
      CHECK(sobolev_norm(laplacian(b.b(u)) - rhs, 0.0) <= 1e-12 * sobolev_norm(rhs, 0.0));
    }
  }
}

TEST_CASE("grad B equals the gradient part of the advection", "[bform]") {
  std::mt19937_64 rng(4);
  Grid g(2, 32, 2 * kPi);
  for (int trial = 0; trial < 5; ++trial) {
    auto u = dealias(random_div_free(g, rng, 6));
    auto a = advect(u);
    auto grad_part = a - leray_project(a);
    auto gb = BAssembly().grad_b(u);
    CHECK(sobolev_norm(gb - grad_part, 0.0) <= 1e-12 * sobolev_norm(grad_part, 0.0));
  }
}

TEST_CASE("riesz multiplier reproduces B1 pair terms", "[bform]") {
  std::mt19937_64 rng(5);
  Grid g(2, 16, 2 * kPi);
  auto u = dealias(random_div_free(g, rng, 3));
  ScalarField acc(g);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) {
      auto p = dealiased_product(u[i], u[k]);
      auto r = apply_multiplier(SpectralMultiplier::riesz_pair(i, k), p);
      acc += chi_cutoff(r, 1.0);
    }
  CHECK((BAssembly().b1(u) - acc).max_abs() < 1e-14);
}
