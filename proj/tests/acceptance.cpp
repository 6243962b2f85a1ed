// Acceptance suite. `acceptance --criterion N` runs one criterion and prints
// a single line "criterion N PASS|FAIL: ..."; without arguments all fifteen
// run in order. Exit status is 0 when every selected criterion passes.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eulab/illposedness.hpp"

using namespace eulab;

namespace {

constexpr double kPi = std::numbers::pi;
const InterpConfig kQuintic{InterpKind::QuinticSpline, 2};

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

VectorField dealiased(VectorField u) {
  for (int d = 0; d < u.dim(); ++d) u[d] = dealias(u[d]);
  return u;
}

/// Copies the Fourier coefficients of a coarse field onto a finer grid of the
/// same box, so one random draw gives the same function at every N.
ScalarField upsample(const ScalarField& f, const Grid& fine) {
  const Grid& g = f.grid();
  const Spectrum& c = f.spectrum();
  Spectrum out(fine.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Index ix = g.unravel(i), jx{0, 0, 0};
    bool nyquist = false;
    for (int d = 0; d < g.dim(); ++d) {
      const int k = g.wavenumber(ix[d]);
      nyquist = nyquist || 2 * std::abs(k) == g.n();
      jx[d] = (k + fine.n()) % fine.n();
    }
    if (!nyquist) out[fine.ravel(jx)] = c[i];
  }
  return ScalarField::from_spectrum(fine, std::move(out));
}

VectorField upsample(const VectorField& u, const Grid& fine) {
  std::vector<ScalarField> c;
  for (const auto& f : u.components()) c.push_back(upsample(f, fine));
  return VectorField(std::move(c));
}

/// Smooth random div-free data with modes |k| <= 4, normalized to ||u||_3.
VectorField smooth_data(const Grid& g, std::uint64_t seed, double norm3) {
  std::mt19937_64 rng(seed);
  const Grid coarse(g.dim(), 16, g.length());
  VectorField u = upsample(random_div_free(coarse, rng, 4, 2.0, 3.0, norm3), g);
  return dealiased(u);
}

GeodesicConfig geo_config(double dt, InterpConfig interp = kQuintic) {
  GeodesicConfig c;
  c.dt = dt;
  c.interp = interp;
  c.inversion.interp = interp;
  return c;
}

ScalarField laplacian(const ScalarField& f) {
  ScalarField out(f.grid());
  for (int d = 0; d < f.grid().dim(); ++d) out += partial_derivative(partial_derivative(f, d), d);
  return out;
}

// ---------------------------------------------------------------------------

Outcome chi_laws() {
  std::mt19937_64 rng(101);
  double adj = 0.0, idem = 0.0, smooth = -INFINITY;
  int fields = 0;
  for (double L : {2 * kPi, 20.0}) {
    Grid g(2, 64, L);
    for (int t = 0; t < 50; ++t, ++fields) {
      auto f = random_scalar(g, rng, 20, 1.0), h = random_scalar(g, rng, 20, 1.0);
      auto cf = chi_cutoff(f, 1.0), ch = chi_cutoff(h, 1.0);
      adj = std::max(adj, std::abs(l2_pairing(cf, h) - l2_pairing(f, ch)) /
                              std::sqrt(l2_pairing(f, f) * l2_pairing(h, h)));
      idem = std::max(idem, (chi_cutoff(cf, 1.0) - cf).max_abs());
      for (auto [s, sp] : {std::pair{2.0, 1.0}, std::pair{3.0, 2.0}})
        smooth = std::max(smooth, sobolev_norm(cf, s + sp) / (std::pow(2.0, sp / 2) * sobolev_norm(f, s)) - 1.0);
    }
  }
  bool ok = adj <= 1e-12 && idem == 0.0 && smooth <= 0.0;
  return {ok, fmt("%d fields: self-adjoint defect %.2e (tol 1e-12), idempotence defect %.1e (exact), "
                  "max smoothing ratio - 1 = %.3e (<= 0)",
                  fields, adj, idem, smooth)};
}

Outcome interpolation_inequality() {
  std::mt19937_64 rng(102);
  Grid g(2, 64, 2 * kPi);
  double slack = -INFINITY;
  const std::vector<std::tuple<double, double, double>> cases{{1, 3, 0.5}, {0, 2, 0.25}, {0.5, 2.5, 0.3}};
  for (int t = 0; t < 100; ++t) {
    auto f = random_scalar(g, rng, 24, 1.0);
    for (auto [s1, s2, th] : cases) {
      double lhs = sobolev_norm(f, th * s1 + (1 - th) * s2);
      double rhs = std::pow(sobolev_norm(f, s1), th) * std::pow(sobolev_norm(f, s2), 1 - th);
      slack = std::max(slack, (lhs - rhs) / rhs);
    }
  }
  return {slack <= 1e-10, fmt("100 fields x 3 index triples: max relative excess %.3e (tol 1e-10)", slack)};
}

Outcome biot_savart_round_trip() {
  std::mt19937_64 rng(103);
  Grid g(2, 64, 2 * kPi);
  double worst = sobolev_norm(biot_savart(vorticity(taylor_green(g))) - taylor_green(g), 2.0) /
                 sobolev_norm(taylor_green(g), 2.0);
  for (int t = 0; t < 20; ++t) {
    auto u = random_div_free(g, rng, 16);
    worst = std::max(worst, sobolev_norm(biot_savart(vorticity(u)) - u, 2.0) / sobolev_norm(u, 2.0));
  }
  Grid g3(3, 16, 2 * kPi);
  for (int t = 0; t < 5; ++t) {
    auto u = random_div_free(g3, rng, 5);
    worst = std::max(worst, sobolev_norm(biot_savart(vorticity(u)) - u, 2.0) / sobolev_norm(u, 2.0));
  }
  return {worst <= 1e-10, fmt("taylor-green + 20 random (2d) + 5 random (3d): max relative H^2 error %.3e (tol 1e-10)",
                              worst)};
}

Outcome gradient_vorticity() {
  std::mt19937_64 rng(104);
  int violations = 0, fields = 0;
  double worst = 0.0;
  for (int dim : {2, 3}) {
    Grid g(dim, dim == 2 ? 64 : 16, 2 * kPi);
    for (int t = 0; t < 50; ++t, ++fields) {
      auto u = random_div_free(g, rng, dim == 2 ? 16 : 6, 1.0);
      for (double s : {1.0, 2.5, 4.0}) {
        double r = sobolev_norm(jacobian(u), s - 1) / (dim * sobolev_norm(vorticity(u), s - 1));
        worst = std::max(worst, r);
        violations += r > 1.0;
      }
    }
  }
  return {violations == 0,
          fmt("%d fields, s in {1, 2.5, 4}: %d violations, max ||du|| / (n ||Omega||) = %.4f", fields, violations, worst)};
}

Outcome pressure_consistency() {
  std::mt19937_64 rng(105);
  Grid g(2, 64, 2 * kPi);
  double grad = 0.0, poisson = 0.0;
  BAssembly b;
  for (int t = 0; t < 20; ++t) {
    auto u = dealiased(random_div_free(g, rng, 12));
    auto a = advect(u);
    auto gp = a - leray_project(a);
    grad = std::max(grad, sobolev_norm(b.grad_b(u) - gp, 0.0) / sobolev_norm(gp, 0.0));
    MatrixField du = jacobian(u);
    ScalarField rhs(g);
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k) rhs += dealiased_product(du(k, i), du(i, k));
    Spectrum c = rhs.spectrum();
    c[0] = 0.0;
    rhs = ScalarField::from_spectrum(g, c);
    poisson = std::max(poisson, sobolev_norm(laplacian(b.b(u)) - rhs, 0.0) / sobolev_norm(rhs, 0.0));
  }
  bool ok = grad <= 1e-9 && poisson <= 1e-9;
  return {ok, fmt("20 fields: grad B vs (1-P)(u.grad)u %.3e, poisson residual %.3e (tol 1e-9 relative)", grad, poisson)};
}

StepperConfig stepper(double dt) {
  StepperConfig c;
  c.dt = dt;
  return c;
}

Outcome divergence_preservation() {
  Grid g(2, 64, 2 * kPi);
  auto u0 = smooth_data(g, 106, 0.5);
  auto tr = euler_solve(u0, 1.0, stepper(1e-3), false);
  bool ok = tr.max_div_drift <= 1e-7;
  return {ok, fmt("N=64 dt=1e-3 T=1 ||u0||_3=0.5: max ||div u||_{s-1} = %.3e (tol 1e-7)", tr.max_div_drift)};
}

Outcome taylor_green_stationarity() {
  Grid g(2, 64, 2 * kPi);
  auto u0 = taylor_green(g);
  auto tr = euler_solve(u0, 1.0, stepper(1e-3), false);
  double gap = sobolev_norm(tr.states.back().u - u0, 2.0);
  return {gap <= 1e-8, fmt("N=64 dt=1e-3 T=1: ||u(1) - u(0)||_2 = %.3e (tol 1e-8)", gap)};
}

/// Relative H^2.5 gap between the geodesic velocity v o phi^{-1} and the
/// Eulerian solution at T = 1, both from the same data at resolution N.
double el_gap(int n, double geo_dt, InterpConfig interp) {
  Grid g(2, n, 2 * kPi);
  auto u0 = smooth_data(g, 108, 0.5);
  auto states = geodesic_solve(u0, 1.0, geo_config(geo_dt, interp), false);
  InversionConfig inv;
  inv.interp = interp;
  auto u_l = compose(states.back().v, invert(states.back().phi, inv), interp);
  auto ref = euler_solve(u0, 1.0, stepper(1e-2), false).states.back().u;
  return sobolev_norm(u_l - ref, 2.5) / sobolev_norm(ref, 2.5);
}

Outcome eulerian_lagrangian() {
  const InterpConfig cubic{InterpKind::CubicSpline, 1};
  double fine = el_gap(64, 0.1, kQuintic);
  double coarse_c = el_gap(32, 0.2, cubic), fine_c = el_gap(64, 0.1, cubic);
  bool ok = fine <= 1e-3 && fine_c < coarse_c;
  return {ok, fmt("N=64 gap %.3e (tol 1e-3); refinement with cubic interpolation: (N=32, dt=0.2) %.3e -> "
                  "(N=64, dt=0.1) %.3e",
                  fine, coarse_c, fine_c)};
}

Outcome volume_and_det() {
  Grid g(2, 64, 2 * kPi);
  auto u0 = smooth_data(g, 109, 0.5);
  auto states = geodesic_solve(u0, 1.0, geo_config(0.1));
  double vol = 0.0;
  for (const auto& s : states) {
    const ScalarField dj = det_jacobian(s.phi);
    for (double x : dj.values()) vol = std::max(vol, std::abs(x - 1.0));
  }
  // u = (c/2)(sin(x1 - a), sin(x2 - b)) fixes (a, b), where div u = c.
  const double c = 0.4;
  const std::size_t node = g.ravel({16, 40, 0});
  const Point a = g.position(node);
  auto u = VectorField::sample(g, [&](const Point& x) {
    return Point{0.5 * c * std::sin(x[0] - a[0]), 0.5 * c * std::sin(x[1] - a[1]), 0};
  });
  EulerTrajectory tr;
  for (int i = 0; i <= 100; ++i) tr.states.push_back({0.01 * i, u});
  auto phis = flow_of(tr, kQuintic);
  double det = 0.0;
  for (int i : {25, 50, 75, 100})
    det = std::max(det, std::abs(det_jacobian(phis[i])[node] / std::exp(c * 0.01 * i) - 1.0));
  bool ok = vol <= 1e-6 && det <= 1e-6;
  return {ok, fmt("geodesic N=64 T=1: max |det dphi - 1| = %.3e; constant-divergence flow: max |det / e^{ct} - 1| = "
                  "%.3e (tol 1e-6)",
                  vol, det)};
}

Outcome vorticity_conservation() {
  Grid g(2, 128, 2 * kPi);
  auto u0 = smooth_data(g, 110, 0.5);
  auto tr = euler_solve(u0, 1.0, stepper(1e-2));
  auto phi = flow_of(tr, kQuintic).back();
  auto om0 = vorticity(u0);
  auto pb = vorticity_pullback(phi, vorticity(tr.states.back().u), kQuintic);
  double rel = sobolev_norm(pb - om0, 1.5) / sobolev_norm(om0, 1.5);
  return {rel <= 1e-4, fmt("N=128 T=1 dt=1e-2: relative H^{s-1} defect %.3e (tol 1e-4)", rel)};
}

Outcome exponential_identities() {
  Grid g(2, 32, 2 * kPi);
  auto u0 = smooth_data(g, 111, 0.5);
  double resc = 0.0;
  for (double t : {0.3, 0.5, 0.7, 1.0}) {
    auto a = exp_map(t * u0, 1.0, geo_config(0.05 / t));
    auto b = exp_map(u0, t, geo_config(0.05));
    resc = std::max(resc, (a.displacement() - b.displacement()).max_abs());
  }
  auto v = smooth_data(g, 112, 1.0);
  std::vector<double> eps{1e-2, 5e-3, 2.5e-3}, err;
  for (double e : eps) err.push_back(sobolev_norm(dexp_fd(VectorField(g), v, e, geo_config(0.1)) - v, 2.0));
  const double slope = loglog_slope(eps, err);
  bool ok = resc <= 1e-7 && std::abs(slope - 2.0) <= 0.2;
  return {ok, fmt("rescaling defect %.3e (tol 1e-7); d0exp - id errors %.2e %.2e %.2e, slope %.3f (2 +- 0.2)", resc,
                  err[0], err[1], err[2], slope)};
}

Outcome scaling_identities() {
  Grid g(2, 64, 2 * kPi);
  auto u0 = smooth_data(g, 113, 0.5);
  const auto c = stepper(1e-2);
  double cov = 0.0, et = 0.0;
  for (double lam : {0.3, 0.7, 3.0}) cov = std::max(cov, trajectory_covariance(u0, 1.0, lam, c));
  for (double T : {0.3, 0.7, 1.3}) et = std::max(et, scaling_check(u0, T, T, c));
  bool ok = cov <= 1e-6 && et <= 1e-5;
  return {ok, fmt("trajectory covariance (lambda 0.3, 0.7, 3) %.3e (tol 1e-6); E_T(u0) = E_1(T u0) / T at T = 0.3, "
                  "0.7, 1.3: %.3e (tol 1e-5)",
                  cov, et)};
}

Outcome composition_map() {
  const double R = 0.1;
  auto s = composition_experiment(R, 8, 2.5);
  CompositionParams tp;
  tp.translation = true;
  auto t = composition_experiment(R, 8, 2.5, tp);
  auto rows = s.resolved_rows();
  std::ostringstream os;
  os << "R=0.1 N=" << s.meta("N").value_or("?") << ": " << s.k_resolved << " of 8 k resolved (delta_1 = "
     << fmt("%.2f", s.meta_number("M") / (2 * s.meta_number("lipschitz") * s.meta_number("cell")))
     << " cells, need >= 4)";
  bool ok = rows.size() >= 2;
  if (ok) {
    std::vector<double> ks, in;
    double min_out = INFINITY;
    for (const auto& r : rows) {
      ks.push_back(r.k);
      in.push_back(r.input_gap);
      min_out = std::min(min_out, r.output_gap);
    }
    const double slope = loglog_slope(ks, in), floor = 0.5 * R * s.meta_number("inv_C");
    os << fmt("; input slope %.4f (-1 +- 0.05); min output gap %.4e vs 0.5 R / C = %.4e", slope, min_out, floor);
    ok = std::abs(slope + 1.0) <= 0.05 && min_out >= floor;
  }
  auto trows = t.resolved_rows();
  if (trows.empty()) {
    os << "; translation: no resolved k";
    ok = false;
  } else {
    double worst = 0.0;
    for (const auto& r : trows) worst = std::max(worst, std::abs(r.output_gap / R - 1.0));
    os << fmt("; translation |gap / R - 1| = %.4f (tol 0.02)", worst);
    ok = ok && worst <= 0.02;
  }
  return {ok, os.str()};
}

Outcome solution_map() {
  const Grid g(2, 128, 25.0);
  SolutionMapParams p;
  p.stepper.dt = 0.02;
  p.geodesic.dt = 0.05;
  std::vector<double> floors;
  std::ostringstream os;
  bool ok = true;
  for (double R : {0.05, 0.1, 0.2}) {
    auto s = solution_map_experiment(taylor_green(g, 0.2), R, 8, 2.5, p);
    auto rows = s.resolved_rows();
    const double rho1 = std::min(s.meta_number("M") * R / 16, s.meta_number("jet_radius"));
    os << fmt("R=%g: %d of 8 k resolved (rho_1 = %.3g cells, need >= 4)", R, s.k_resolved, rho1 / g.spacing());
    if (rows.size() < 2) {
      ok = false;
      os << "; ";
      continue;
    }
    std::vector<double> ks, in;
    double lo = INFINITY, hi = 0.0;
    for (const auto& r : rows) {
      ks.push_back(r.k);
      in.push_back(r.input_gap);
      lo = std::min(lo, r.output_gap);
      hi = std::max(hi, r.output_gap);
    }
    const double slope = loglog_slope(ks, in);
    os << fmt(", input slope %.3f, output floor %.3e (max %.3e); ", slope, lo, hi);
    ok = ok && std::abs(slope + 1.0) <= 0.05 && lo > 0.0 && lo >= 0.25 * hi;
    floors.push_back(lo / R);
  }
  if (floors.size() == 3) {
    auto [mn, mx] = std::minmax_element(floors.begin(), floors.end());
    os << fmt("floor / R spread %.3f (tol 0.25)", *mx / *mn - 1.0);
    ok = ok && *mx / *mn - 1.0 <= 0.25;
  } else {
    os << "floor linearity not testable";
  }
  return {ok, os.str()};
}

Outcome rk4_order() {
  Grid g(2, 32, 2 * kPi);
  auto u0 = smooth_data(g, 115, 1.0);
  auto run = [&](double dt) { return euler_solve(u0, 0.5, stepper(dt), false).states.back().u; };
  auto a = run(0.1), b = run(0.05), c = run(0.025);
  double eo = std::log2(sobolev_norm(a - b, 2.0) / sobolev_norm(b - c, 2.0));
  auto v0 = smooth_data(g, 116, 2.0);
  auto grun = [&](double dt) { return exp_map(v0, 1.0, geo_config(dt)).displacement(); };
  auto ga = grun(0.25), gb = grun(0.125), gc = grun(0.0625);
  double go = std::log2(sobolev_norm(ga - gb, 2.0) / sobolev_norm(gb - gc, 2.0));
  bool ok = std::abs(eo - 4.0) <= 0.3 && std::abs(go - 4.0) <= 0.3;
  return {ok, fmt("eulerian order %.3f (dt 0.1/0.05/0.025), geodesic order %.3f (dt 0.25/0.125/0.0625); 4 +- 0.3", eo,
                  go)};
}

const std::vector<std::function<Outcome()>> kCriteria{
    chi_laws,          interpolation_inequality, biot_savart_round_trip, gradient_vorticity,   pressure_consistency,
    divergence_preservation, taylor_green_stationarity, eulerian_lagrangian, volume_and_det, vorticity_conservation,
    exponential_identities,  scaling_identities,        composition_map,     solution_map,   rk4_order};

bool run(int n) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = kCriteria.at(n - 1)();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("criterion %d %s: %s [%.1f s]\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str(), sec);
  std::fflush(stdout);
  return o.pass;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int criterion = 0;
  app.add_option("--criterion", criterion, "criterion number 1-15; all when omitted")->check(CLI::Range(1, 15));
  CLI11_PARSE(app, argc, argv);
  bool ok = true;
  if (criterion > 0) return run(criterion) ? 0 : 1;
  for (int n = 1; n <= 15; ++n) ok = run(n) && ok;
  return ok ? 0 : 1;
}
