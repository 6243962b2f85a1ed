#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "eulab/eulerian.hpp"
#include "eulab/interp.hpp"

namespace eulab {

/// phi(x) = x + g(x) on the torus, stored through its periodic displacement g.
class Diffeo {
public:
  explicit Diffeo(VectorField displacement) : g_(std::move(displacement)) {}

  static Diffeo identity(const Grid& grid) { return Diffeo(VectorField(grid)); }

  static Diffeo shift(const Grid& grid, const Point& a) {
    return Diffeo(VectorField::sample(grid, [&](const Point&) { return a; }));
  }

  const Grid& grid() const { return g_.grid(); }
  const VectorField& displacement() const { return g_; }
  VectorField& displacement() { return g_; }

  /// phi evaluated at grid node idx (not wrapped into the box).
  Point image(std::size_t idx) const {
    Point x = grid().position(idx);
    for (int d = 0; d < grid().dim(); ++d) x[d] += g_[d][idx];
    return x;
  }

private:
  VectorField g_;
};

inline ScalarField det_jacobian(const Diffeo& phi) {
  const Grid& g = phi.grid();
  const MatrixField dg = jacobian(phi.displacement());
  std::vector<double> out(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (g.dim() == 2) {
      double a = 1.0 + dg(0, 0)[p], b = dg(0, 1)[p], c = dg(1, 0)[p], d = 1.0 + dg(1, 1)[p];
      out[p] = a * d - b * c;
    } else {
      double m[3][3];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[i][j] = (i == j ? 1.0 : 0.0) + dg(i, j)[p];
      out[p] = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    }
  }
  return ScalarField(g, std::move(out));
}

/// f o phi sampled on the grid.
inline ScalarField compose(const ScalarField& f, const Diffeo& phi, InterpConfig cfg = {}) {
  require_same_grid(f.grid(), phi.grid(), "compose");
  PeriodicInterpolant ip(f, cfg);
  std::vector<double> out(f.size());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = ip(phi.image(p));
  return ScalarField(f.grid(), std::move(out));
}

inline VectorField compose(const VectorField& v, const Diffeo& phi, InterpConfig cfg = {}) {
  std::vector<ScalarField> c;
  for (const auto& f : v.components()) c.push_back(compose(f, phi, cfg));
  return VectorField(std::move(c));
}

/// Samples an analytic function at phi(x) for every grid node.
inline ScalarField compose_function(const std::function<double(const Point&)>& f, const Diffeo& phi) {
  std::vector<double> out(phi.grid().size());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = f(phi.image(p));
  return ScalarField(phi.grid(), std::move(out));
}

/// Share of spectral energy in the outer third of the lattice; compose warns
/// through this when interpolation is asked to resolve near-Nyquist content.
inline double out_of_band_fraction(const ScalarField& f) {
  const auto& c = f.spectrum();
  const Grid& g = f.grid();
  double total = 0.0, outer = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    double a = std::norm(c[i]);
    total += a;
    Index ix = g.unravel(i);
    for (int d = 0; d < g.dim(); ++d)
      if (std::abs(g.wavenumber(ix[d])) > g.dealias_max()) {
        outer += a;
        break;
      }
  }
  return total > 0.0 ? outer / total : 0.0;
}

struct InversionConfig {
  double tolerance = 1e-10;
  int max_iterations = 100;
  /// One extra Newton step after convergence.
  bool polish = true;
  InterpConfig interp{};
};

struct InversionReport {
  double forward_residual = 0.0;  ///< max |phi(psi(x)) - x|
  double backward_residual = 0.0; ///< max |psi(phi(x)) - x|, interpolation limited
  int max_iterations_used = 0;
  std::size_t newton_points = 0;
};

namespace detail {

inline bool solve_small(int dim, double m[3][3], const double r[3], double out[3]) {
  if (dim == 2) {
    double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if (!(std::abs(det) > 1e-300)) return false;
    out[0] = (m[1][1] * r[0] - m[0][1] * r[1]) / det;
    out[1] = (-m[1][0] * r[0] + m[0][0] * r[1]) / det;
    return true;
  }
  double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  if (!(std::abs(det) > 1e-300)) return false;
  for (int c = 0; c < 3; ++c) {
    double a[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a[i][j] = (j == c) ? r[i] : m[i][j];
    out[c] = (a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
              a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])) /
             det;
  }
  return true;
}

} // namespace detail

/// psi = phi^{-1}. Per grid node x, iterates y <- x - g(y) and switches to
/// Newton with (I + dg(y)) once the contraction stalls.
inline Diffeo invert(const Diffeo& phi, const InversionConfig& cfg = {}, InversionReport* report = nullptr) {
  const Grid& grid = phi.grid();
  const int dim = grid.dim();
  std::vector<PeriodicInterpolant> gi;
  for (int d = 0; d < dim; ++d) gi.emplace_back(phi.displacement()[d], cfg.interp);

  std::vector<std::vector<double>> h(dim, std::vector<double>(grid.size()));
  InversionReport rep;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const Point x = grid.position(p);
    Point y = x;
    for (int d = 0; d < dim; ++d) y[d] -= phi.displacement()[d][p];
    double prev = INFINITY;
    bool newton = false;
    double res = INFINITY;
    int it = 0;
    int extra = cfg.polish ? 1 : 0;
    for (; it < cfg.max_iterations; ++it) {
      Point gy{0, 0, 0};
      Point grads[3];
      for (int d = 0; d < dim; ++d) gy[d] = newton ? gi[d].value_gradient(y, grads[d]) : gi[d](y);
      double r[3] = {0, 0, 0};
      res = 0.0;
      for (int d = 0; d < dim; ++d) {
        r[d] = y[d] + gy[d] - x[d];
        res = std::max(res, std::abs(r[d]));
      }
      if (res <= cfg.tolerance) {
        if (extra == 0 || res == 0.0) break;
        --extra;
        if (!newton) {
          for (int d = 0; d < dim; ++d) gi[d].value_gradient(y, grads[d]);
          newton = true;
        }
      } else if (!newton && res > 0.5 * prev) {
        newton = true;
        ++rep.newton_points;
        prev = res;
        continue; // re-evaluate with gradients at the same y
      }
      prev = res;
      if (newton) {
        double m[3][3] = {};
        for (int i = 0; i < dim; ++i)
          for (int j = 0; j < dim; ++j) m[i][j] = (i == j ? 1.0 : 0.0) + grads[i][j];
        double step[3];
        if (!detail::solve_small(dim, m, r, step)) throw NumericalFailure("invert: singular Jacobian");
        for (int d = 0; d < dim; ++d) y[d] -= step[d];
      } else {
        for (int d = 0; d < dim; ++d) y[d] = x[d] - gy[d];
      }
    }
    if (!(res <= cfg.tolerance)) {
      std::ostringstream os;
      os << "invert: no convergence after " << cfg.max_iterations << " iterations, residual " << res;
      throw NumericalFailure(os.str());
    }
    rep.forward_residual = std::max(rep.forward_residual, res);
    rep.max_iterations_used = std::max(rep.max_iterations_used, it);
    for (int d = 0; d < dim; ++d) h[d][p] = y[d] - x[d];
  }
  std::vector<ScalarField> c;
  for (int d = 0; d < dim; ++d) c.emplace_back(grid, std::move(h[d]));
  Diffeo psi{VectorField(std::move(c))};

  if (report) {
    std::vector<PeriodicInterpolant> hi;
    for (int d = 0; d < dim; ++d) hi.emplace_back(psi.displacement()[d], cfg.interp);
    double back = 0.0;
    for (std::size_t p = 0; p < grid.size(); ++p) {
      Point z = phi.image(p);
      for (int d = 0; d < dim; ++d) back = std::max(back, std::abs(z[d] + hi[d](z) - grid.position(p)[d]));
    }
    rep.backward_residual = back;
    *report = rep;
  }
  return psi;
}

/// (phi o psi)(x) = x + h(x) + g(x + h(x)).
inline Diffeo compose_diffeo(const Diffeo& phi, const Diffeo& psi, InterpConfig cfg = {}) {
  VectorField g_at_psi = compose(phi.displacement(), psi, cfg);
  g_at_psi += psi.displacement();
  return Diffeo(std::move(g_at_psi));
}

struct GeodesicConfig {
  double dt = 1e-2;
  double cutoff = 1.0;
  InterpConfig interp{};
  InversionConfig inversion{};
};

/// Gamma_phi(v, v) = (grad B(v o phi^{-1})) o phi. The Eulerian velocity
/// v o phi^{-1} is 2/3-truncated before B is assembled.
inline VectorField christoffel(const Diffeo& phi, const VectorField& v, const GeodesicConfig& cfg = {}) {
  Diffeo inv = invert(phi, cfg.inversion);
  VectorField u = compose(v, inv, cfg.interp);
  for (int d = 0; d < u.dim(); ++d) u[d] = dealias(u[d]);
  VectorField gb = BAssembly(cfg.cutoff).grad_b(u);
  return compose(gb, phi, cfg.interp);
}

struct GeodesicState {
  double t = 0.0;
  Diffeo phi;
  VectorField v;
};

namespace detail {

inline void check_orientation(const Diffeo& phi, double t) {
  ScalarField det = det_jacobian(phi);
  for (double x : det.values())
    if (!(x > 0.0)) {
      std::ostringstream os;
      os << "geodesic: det dphi <= 0 at t = " << t << " (left the diffeomorphism chart)";
      throw NumericalFailure(os.str());
    }
}

} // namespace detail

/// One RK4 step of d/dt (phi, v) = (v, Gamma_phi(v, v)).
inline GeodesicState geodesic_step(const GeodesicState& s, double dt, const GeodesicConfig& cfg = {}) {
  auto stage = [&](const VectorField& g_base, const VectorField& v_base, double a, const VectorField* dg,
                   const VectorField* dv) {
    VectorField g = g_base, v = v_base;
    if (dg) {
      g.axpy(a, *dg);
      v.axpy(a, *dv);
    }
    return std::make_pair(Diffeo(std::move(g)), std::move(v));
  };
  const VectorField& g0 = s.phi.displacement();
  auto [p1, v1] = stage(g0, s.v, 0.0, nullptr, nullptr);
  VectorField kg1 = v1, kv1 = christoffel(p1, v1, cfg);
  auto [p2, v2] = stage(g0, s.v, 0.5 * dt, &kg1, &kv1);
  VectorField kg2 = v2, kv2 = christoffel(p2, v2, cfg);
  auto [p3, v3] = stage(g0, s.v, 0.5 * dt, &kg2, &kv2);
  VectorField kg3 = v3, kv3 = christoffel(p3, v3, cfg);
  auto [p4, v4] = stage(g0, s.v, dt, &kg3, &kv3);
  VectorField kg4 = v4, kv4 = christoffel(p4, v4, cfg);

  VectorField g = g0, v = s.v;
  g.axpy(dt / 6.0, kg1).axpy(dt / 3.0, kg2).axpy(dt / 3.0, kg3).axpy(dt / 6.0, kg4);
  v.axpy(dt / 6.0, kv1).axpy(dt / 3.0, kv2).axpy(dt / 3.0, kv3).axpy(dt / 6.0, kv4);
  if (!g.all_finite() || !v.all_finite()) throw NumericalFailure("geodesic: non-finite state");
  GeodesicState out{s.t + dt, Diffeo(std::move(g)), std::move(v)};
  detail::check_orientation(out.phi, out.t);
  return out;
}

/// Geodesic from (id, u0) up to time T in ceil(T/dt) equal steps.
inline std::vector<GeodesicState> geodesic_solve(const VectorField& u0, double T, const GeodesicConfig& cfg = {},
                                                 bool keep_states = true) {
  if (!(T >= 0.0)) throw std::invalid_argument("geodesic_solve: T must be nonnegative");
  std::vector<GeodesicState> out;
  GeodesicState s{0.0, Diffeo::identity(u0.grid()), u0};
  out.push_back(s);
  if (T == 0.0) return out;
  const long steps = std::max(1L, static_cast<long>(std::ceil(T / cfg.dt - 1e-9)));
  const double h = T / static_cast<double>(steps);
  for (long i = 0; i < steps; ++i) {
    s = geodesic_step(s, h, cfg);
    if (keep_states || i + 1 == steps) out.push_back(s);
  }
  return out;
}

/// exp(t u0) = phi(t; u0): time-t geodesic position from (id, u0).
inline Diffeo exp_map(const VectorField& u0, double t, const GeodesicConfig& cfg = {}) {
  if (!(t >= 0.0)) throw std::invalid_argument("exp_map: t must be nonnegative");
  return geodesic_solve(u0, t, cfg, false).back().phi;
}

/// Flow of a time-dependent velocity: d/dt phi = u(t) o phi, phi(0) = id, one
/// RK4 step per trajectory interval. Velocities at stage times come from cubic
/// Hermite interpolation with du/dt = euler_rhs(u).
inline std::vector<Diffeo> flow_of(const EulerTrajectory& traj, InterpConfig interp = {}, double cutoff = 1.0) {
  const auto& st = traj.states;
  if (st.empty()) throw std::invalid_argument("flow_of: empty trajectory");
  for (std::size_t i = 1; i < st.size(); ++i)
    if (!(st[i].t > st[i - 1].t)) throw std::invalid_argument("flow_of: trajectory is not time sorted");
  const Grid& grid = st.front().u.grid();
  const BAssembly bform(cutoff);
  std::vector<Diffeo> out;
  out.push_back(Diffeo::identity(grid));
  if (st.size() == 1) return out;
  VectorField rhs_prev = euler_rhs(st[0].u, bform);

  auto velocity_rate = [&](const VectorField& u, const Diffeo& phi) {
    return compose(u, phi, interp);
  };

  for (std::size_t i = 0; i + 1 < st.size(); ++i) {
    const double h = st[i + 1].t - st[i].t;
    VectorField rhs_next = euler_rhs(st[i + 1].u, bform);
    // Hermite midpoint: (u0 + u1)/2 + h (f0 - f1)/8.
    VectorField mid = 0.5 * (st[i].u + st[i + 1].u);
    mid.axpy(h / 8.0, rhs_prev).axpy(-h / 8.0, rhs_next);

    const VectorField& g0 = out.back().displacement();
    VectorField k1 = velocity_rate(st[i].u, out.back());
    VectorField g = g0;
    g.axpy(0.5 * h, k1);
    VectorField k2 = velocity_rate(mid, Diffeo(g));
    g = g0;
    g.axpy(0.5 * h, k2);
    VectorField k3 = velocity_rate(mid, Diffeo(g));
    g = g0;
    g.axpy(h, k3);
    VectorField k4 = velocity_rate(st[i + 1].u, Diffeo(g));
    g = g0;
    g.axpy(h / 6.0, k1).axpy(h / 3.0, k2).axpy(h / 3.0, k3).axpy(h / 6.0, k4);
    out.emplace_back(std::move(g));
    rhs_prev = std::move(rhs_next);
  }
  return out;
}

/// u(t) = v(t) o phi(t)^{-1} for matched Lagrangian trajectories.
inline std::vector<VectorField> eulerian_from_lagrangian(const std::vector<Diffeo>& phis,
                                                         const std::vector<VectorField>& vs,
                                                         const InversionConfig& inv = {}, InterpConfig interp = {}) {
  if (phis.size() != vs.size()) throw std::invalid_argument("eulerian_from_lagrangian: trajectory length mismatch");
  std::vector<VectorField> out;
  for (std::size_t i = 0; i < phis.size(); ++i) out.push_back(compose(vs[i], invert(phis[i], inv), interp));
  return out;
}

inline std::vector<VectorField> eulerian_from_lagrangian(const std::vector<GeodesicState>& states,
                                                         const InversionConfig& inv = {}, InterpConfig interp = {}) {
  std::vector<Diffeo> phis;
  std::vector<VectorField> vs;
  for (const auto& s : states) {
    phis.push_back(s.phi);
    vs.push_back(s.v);
  }
  return eulerian_from_lagrangian(phis, vs, inv, interp);
}

/// dphi^T (Omega o phi) dphi, pointwise.
inline MatrixField vorticity_pullback(const Diffeo& phi, const MatrixField& omega, InterpConfig interp = {}) {
  const Grid& g = phi.grid();
  const int n = g.dim();
  MatrixField om_phi(g);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) om_phi(i, j) = compose(omega(i, j), phi, interp);
  const MatrixField dg = jacobian(phi.displacement());
  std::vector<std::vector<double>> out(n * n, std::vector<double>(g.size()));
  for (std::size_t p = 0; p < g.size(); ++p) {
    double J[3][3], W[3][3];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        J[i][j] = (i == j ? 1.0 : 0.0) + dg(i, j)[p];
        W[i][j] = om_phi(i, j)[p];
      }
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) acc += J[i][a] * W[i][j] * J[j][b];
        out[a * n + b][p] = acc;
      }
  }
  MatrixField res(g);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) res(a, b) = ScalarField(g, std::move(out[a * n + b]));
  return res;
}

} // namespace eulab
