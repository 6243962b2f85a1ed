#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "eulab/bform.hpp"

namespace eulab {

/// Raised when a time integration produces non-finite values, leaves the
/// admissible set, or grows past the blow-up guard.
class NumericalFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class StepMethod { RK4, RK2 };

struct StepperConfig {
  double dt = 1e-3;
  StepMethod method = StepMethod::RK4;
  double s_monitor = 2.5;
  double drift_budget = 1e-7;
  double cutoff = 1.0;
  /// Abort when ||u||_s exceeds this multiple of its initial value.
  double blowup_factor = 1e6;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("StepperConfig: dt must be positive");
    if (!(cutoff > 0.0)) throw std::invalid_argument("StepperConfig: cutoff must be positive");
  }
};

struct EulerState {
  double t = 0.0;
  VectorField u;
};

/// One row of solver instrumentation.
struct EulerDiagnostics {
  double t;
  double energy;
  double hs_norm;
  double div_drift;
};

struct EulerTrajectory {
  std::vector<EulerState> states;
  std::vector<EulerDiagnostics> diagnostics;
  bool drift_budget_exceeded = false;
  double max_div_drift = 0.0;
};

/// Right-hand side grad B(u) - (u . grad) u.
inline VectorField euler_rhs(const VectorField& u, const BAssembly& bform = BAssembly{}) {
  VectorField r = bform.grad_b(u);
  r -= advect(u);
  return r;
}

/// ||u||^2_{L^2} in the normalized convention (mean of |u|^2).
inline double energy(const VectorField& u) { return std::pow(sobolev_norm(u, 0.0), 2); }

/// Right side of the evolution law of div u along the flow:
/// chi(D)(2 (u.grad) div u + (div u)^2) - (u.grad) div u.
inline ScalarField div_evolution_residual(const VectorField& u, double cutoff = 1.0) {
  const Grid& g = u.grid();
  ScalarField dv = divergence(u);
  Spectrum transport(g.size());
  for (int k = 0; k < g.dim(); ++k) {
    Spectrum p = dealiased_product_spectrum(u[k], partial_derivative(dv, k));
    for (std::size_t m = 0; m < p.size(); ++m) transport[m] += p[m];
  }
  Spectrum sq = dealiased_product_spectrum(dv, dv);
  Spectrum out(g.size());
  const double r2 = cutoff * cutoff;
  for (std::size_t m = 0; m < out.size(); ++m) {
    Complex low = g.xi_norm2(m) <= r2 ? 2.0 * transport[m] + sq[m] : Complex(0.0);
    out[m] = low - transport[m];
  }
  return ScalarField::from_spectrum(g, std::move(out));
}

namespace detail {

inline void check_finite(const VectorField& u, double t) {
  if (!u.all_finite()) {
    std::ostringstream os;
    os << "blow-up: non-finite velocity at t = " << t;
    throw NumericalFailure(os.str());
  }
}

} // namespace detail

/// One explicit Runge-Kutta step of du/dt = euler_rhs(u).
inline EulerState euler_step(const EulerState& state, const StepperConfig& cfg) {
  cfg.validate();
  const BAssembly bform(cfg.cutoff);
  const double h = cfg.dt;
  const VectorField& u = state.u;
  VectorField next = u;
  if (cfg.method == StepMethod::RK2) {
    VectorField k1 = euler_rhs(u, bform);
    VectorField mid = u;
    mid.axpy(0.5 * h, k1);
    VectorField k2 = euler_rhs(mid, bform);
    next.axpy(h, k2);
  } else {
    VectorField k1 = euler_rhs(u, bform);
    VectorField y = u;
    y.axpy(0.5 * h, k1);
    VectorField k2 = euler_rhs(y, bform);
    y = u;
    y.axpy(0.5 * h, k2);
    VectorField k3 = euler_rhs(y, bform);
    y = u;
    y.axpy(h, k3);
    VectorField k4 = euler_rhs(y, bform);
    next.axpy(h / 6.0, k1);
    next.axpy(h / 3.0, k2);
    next.axpy(h / 3.0, k3);
    next.axpy(h / 6.0, k4);
  }
  detail::check_finite(next, state.t + h);
  return {state.t + h, std::move(next)};
}

/// Integrates from u0 to time T with fixed steps (the last step is shortened
/// to land on T). The initial datum is 2/3-truncated first so that every
/// quadratic term is computed without aliasing. When keep_states is false only
/// the initial and final states are retained.
inline EulerTrajectory euler_solve(const VectorField& u0, double T, const StepperConfig& cfg,
                                   bool keep_states = true) {
  cfg.validate();
  if (!(T > 0.0)) throw std::invalid_argument("euler_solve: T must be positive");
  const double s = cfg.s_monitor;
  std::vector<ScalarField> c;
  for (const auto& f : u0.components()) c.push_back(dealias(f));
  EulerState state{0.0, VectorField(std::move(c))};
  const double u0_norm = sobolev_norm(state.u, s);

  EulerTrajectory traj;
  auto record = [&](const EulerState& st) {
    double drift = sobolev_norm(divergence(st.u), s - 1.0);
    double hs = sobolev_norm(st.u, s);
    traj.diagnostics.push_back({st.t, energy(st.u), hs, drift});
    traj.max_div_drift = std::max(traj.max_div_drift, drift);
    if (drift > cfg.drift_budget * std::max(u0_norm, 1e-300)) traj.drift_budget_exceeded = true;
    if (u0_norm > 0.0 && hs > cfg.blowup_factor * u0_norm) {
      std::ostringstream os;
      os << "blow-up: ||u||_" << s << " grew by more than " << cfg.blowup_factor << " at t = " << st.t;
      throw NumericalFailure(os.str());
    }
  };
  record(state);
  traj.states.push_back(state);

  const long steps = std::max(1L, static_cast<long>(std::ceil(T / cfg.dt - 1e-9)));
  StepperConfig c2 = cfg;
  for (long i = 0; i < steps; ++i) {
    c2.dt = (i + 1 == steps) ? T - state.t : cfg.dt;
    if (c2.dt <= 0.0) break;
    state = euler_step(state, c2);
    record(state);
    if (keep_states || i + 1 == steps) traj.states.push_back(state);
  }
  return traj;
}

} // namespace eulab
