#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "eulab/lagrangian.hpp"

namespace eulab {

struct SeparationRow {
  int k = 0;
  double input_gap = 0.0;
  double output_gap = 0.0;
  std::vector<double> aux;
  bool resolved = true;
};

/// Per-k gaps of a separation construction with its parameters and a
/// resolution watermark.
struct SeparationSeries {
  std::string construction;
  std::vector<std::string> aux_names;
  std::vector<SeparationRow> rows;
  std::vector<std::pair<std::string, std::string>> metadata;
  int k_requested = 0;
  /// Largest k whose support radius meets the resolution bound.
  int k_resolved = 0;
  /// Smallest support radius over resolved rows, in grid cells.
  double watermark_cells = 0.0;

  void note(const std::string& key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    note(key, std::string(buf));
  }
  void note(const std::string& key, std::string v) {
    for (auto& [k, old] : metadata)
      if (k == key) {
        old = std::move(v);
        return;
      }
    metadata.emplace_back(key, std::move(v));
  }
  std::optional<std::string> meta(const std::string& key) const {
    for (const auto& [k, v] : metadata)
      if (k == key) return v;
    return std::nullopt;
  }
  double meta_number(const std::string& key) const {
    auto v = meta(key);
    if (!v) throw std::out_of_range("SeparationSeries: no metadata key " + key);
    return std::stod(*v);
  }
  double aux(const SeparationRow& r, const std::string& name) const {
    for (std::size_t i = 0; i < aux_names.size(); ++i)
      if (aux_names[i] == name) return r.aux.at(i);
    throw std::out_of_range("SeparationSeries: no aux column " + name);
  }
  std::vector<SeparationRow> resolved_rows() const {
    std::vector<SeparationRow> out;
    for (const auto& r : rows)
      if (r.resolved) out.push_back(r);
    return out;
  }
  void validate() const {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0 && rows[i].k <= rows[i - 1].k) throw std::logic_error("SeparationSeries: k not increasing");
      if (!(rows[i].input_gap >= 0.0) || !(rows[i].output_gap >= 0.0))
        throw std::logic_error("SeparationSeries: negative or NaN gap");
      if (rows[i].aux.size() != aux_names.size()) throw std::logic_error("SeparationSeries: aux width mismatch");
    }
  }
};

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double a = std::log(x[i]) - mx;
    sxy += a * (std::log(y[i]) - my);
    sxx += a * a;
  }
  return sxy / sxx;
}

namespace detail {

/// Runs body(i) for i in [0, count) on up to `threads` workers; the first
/// exception is rethrown after all workers join.
template <class Body>
void parallel_for(int count, unsigned threads, Body body) {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  unsigned workers = std::min<unsigned>(threads == 0 ? hw : threads, std::max(count, 1));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto run = [&] {
    for (int i; (i = next++) < count;) {
      if (failed) return;
      try {
        body(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

inline double radial_distance(const Grid& g, const Point& x, const Point& c) { return periodic_distance(g, x, c); }

/// max over grid nodes of the spectral norm of I + dg.
inline double lipschitz_bound(const VectorField& disp) {
  const Grid& g = disp.grid();
  const int n = g.dim();
  MatrixField dg = jacobian(disp);
  double best = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    double J[3][3] = {};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) J[i][j] = (i == j ? 1.0 : 0.0) + dg(i, j)[p];
    // Largest eigenvalue of J^T J by power iteration.
    double A[3][3] = {};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) A[i][j] += J[k][i] * J[k][j];
    double x[3] = {1.0, 0.7, 0.3}, lam = 0.0;
    for (int it = 0; it < 60; ++it) {
      double y[3] = {};
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) y[i] += A[i][j] * x[j];
      double nrm = 0.0;
      for (int i = 0; i < n; ++i) nrm += y[i] * y[i];
      nrm = std::sqrt(nrm);
      if (nrm == 0.0) break;
      for (int i = 0; i < n; ++i) x[i] = y[i] / nrm;
      lam = nrm;
    }
    best = std::max(best, std::sqrt(lam));
  }
  return best;
}

inline std::size_t nearest_node(const Grid& g, const Point& x) {
  Index ix{0, 0, 0};
  for (int d = 0; d < g.dim(); ++d) {
    long i = std::lround(x[d] / g.spacing());
    ix[d] = static_cast<int>(((i % g.n()) + g.n()) % g.n());
  }
  return g.ravel(ix);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Composition map (f, phi) -> f o phi^{-1}

struct CompositionParams {
  int dim = 2;
  int n = 1024;
  double box = 20.0;
  /// Support radius of the direction delta phi.
  double perturbation_radius = 5.0;
  double base_radius = 2.0;
  double base_amplitude = 1.0;
  /// Clearance between the two support balls and the box walls.
  double margin = 1.5;
  /// Plateau direction: phi_k is a pure translation near x*.
  bool translation = false;
  double plateau = 0.6;
  double min_cells = 4.0;
  /// Also evaluate rows whose data bumps fall below min_cells (flagged).
  bool keep_unresolved = false;
  InversionConfig inversion{};
  unsigned threads = 0;
};

/// Non-uniform continuity of nu(f, phi) = f o phi^{-1} near p* = (f*, id).
/// p_k = (f* + df_k, id + dphi/k) and p~_k = (f* + df_k, id), where
/// ||dphi||_s = ||df_k||_s = R/2, |dphi(x*)| = M, and df_k is a bump on
/// B_{delta_k}(x*) with delta_k = M/(2kL), L the Lipschitz bound of id + dphi.
inline SeparationSeries composition_experiment(double R, int k_max, double s, const CompositionParams& prm = {}) {
  if (!(R > 0.0)) throw std::invalid_argument("composition_experiment: R must be positive");
  if (k_max < 1) throw std::invalid_argument("composition_experiment: k_max must be at least 1");
  const double ell = prm.perturbation_radius, r0 = prm.base_radius, m = prm.margin;
  const double required = 2.0 * (ell + r0) + 3.0 * m;
  if (prm.box < required) {
    std::ostringstream os;
    os << "composition_experiment: supports overlap or cross the box; box length must be at least " << required;
    throw std::invalid_argument(os.str());
  }
  const Grid g(prm.dim, prm.n, prm.box);
  const double h = g.spacing();
  Point star{m + ell, 0.5 * prm.box, prm.dim == 3 ? 0.5 * prm.box : 0.0};
  Point base{prm.box - m - r0, 0.5 * prm.box, star[2]};

  auto shape = [&](const Point& x) {
    double t = detail::radial_distance(g, x, star) / ell;
    return prm.translation ? plateau_profile(t, prm.plateau) : bump_profile(t);
  };
  ScalarField dir = ScalarField::sample(g, shape);
  const double dir_norm = sobolev_norm(dir, s);
  if (!(dir_norm > 0.0)) throw std::invalid_argument("composition_experiment: perturbation not resolved");
  const double A = 0.5 * R / dir_norm;
  std::vector<ScalarField> dc;
  dc.push_back(A * dir);
  for (int d = 1; d < prm.dim; ++d) dc.emplace_back(g);
  const VectorField dphi(std::move(dc));
  const double M = A * shape(star);
  {
    ScalarField det = det_jacobian(Diffeo(dphi));
    for (double x : det.values())
      if (!(x > 0.0)) throw std::invalid_argument("composition_experiment: R too large, id + dphi is not a diffeomorphism");
  }
  const double L = detail::lipschitz_bound(dphi);
  if (prm.translation && M + M / (2.0 * L) >= prm.plateau * ell)
    throw std::invalid_argument("composition_experiment: translation plateau too small for the displacement");

  auto delta = [&](int k) { return M / (2.0 * k * L); };
  int k_res = 0;
  while (k_res < k_max && delta(k_res + 1) >= prm.min_cells * h) ++k_res;
  const int k_eval = prm.keep_unresolved ? k_max : k_res;

  auto f_base = [&](const Point& x) {
    return prm.base_amplitude * bump_profile(detail::radial_distance(g, x, base) / r0);
  };

  SeparationSeries out;
  out.construction = prm.translation ? "composition-translation" : "composition";
  out.aux_names = {"support_cells", "data_norm", "image_norm", "distortion", "pythagoras", "inverse_residual"};
  out.k_requested = k_max;
  out.k_resolved = k_res;
  out.watermark_cells = k_res > 0 ? delta(k_res) / h : 0.0;
  out.rows.resize(k_eval);

  detail::parallel_for(k_eval, prm.threads, [&](int i) {
    const int k = i + 1;
    const double dk = delta(k);
    auto df_shape = [&](const Point& x) { return bump_profile(detail::radial_distance(g, x, star) / dk); };
    const double df_raw = sobolev_norm(ScalarField::sample(g, df_shape), s);
    if (!(df_raw > 0.0)) {
      // Support below one cell and missing every node.
      out.rows[i] = {k, 0.5 * R / k, 0.0, {dk / h, 0.0, 0.0, 0.0, 0.0, 0.0}, false};
      return;
    }
    const double B = 0.5 * R / df_raw;
    auto df = [&](const Point& x) { return B * df_shape(x); };
    auto f_k = [&](const Point& x) { return f_base(x) + df(x); };

    VectorField disp = dphi;
    disp *= 1.0 / k;
    InversionReport rep;
    Diffeo inv = invert(Diffeo(disp), prm.inversion, &rep);
    ScalarField nu = compose_function(f_k, inv);
    ScalarField nu_tilde = ScalarField::sample(g, f_k);
    ScalarField data = ScalarField::sample(g, df);
    ScalarField image = compose_function(df, inv);

    SeparationRow row;
    row.k = k;
    row.input_gap = sobolev_norm(disp, s);
    row.output_gap = sobolev_norm(nu - nu_tilde, s);
    const double a = sobolev_norm(data, s), b = sobolev_norm(image, s);
    row.aux = {dk / h, a, b, b / a, row.output_gap * row.output_gap / (a * a + b * b), rep.forward_residual};
    row.resolved = k <= k_res;
    out.rows[i] = std::move(row);
  });

  double inv_c = INFINITY;
  for (const auto& r : out.rows)
    if (r.resolved) {
      double d = out.aux(r, "distortion");
      inv_c = std::min(inv_c, std::min(d, 1.0 / d));
    }
  out.note("R", R);
  out.note("s", s);
  out.note("dim", prm.dim);
  out.note("N", prm.n);
  out.note("box", prm.box);
  out.note("perturbation_radius", ell);
  out.note("translation", prm.translation ? 1.0 : 0.0);
  out.note("M", M);
  out.note("lipschitz", L);
  out.note("cell", h);
  out.note("min_cells", prm.min_cells);
  out.note("k_resolved", k_res);
  out.note("watermark_cells", out.watermark_cells);
  out.note("inv_C", std::isfinite(inv_c) ? inv_c : 0.0);
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Derivative of the exponential map

/// (exp(u0 + eps v) - exp(u0 - eps v)) / (2 eps) as a displacement field.
inline VectorField dexp_fd(const VectorField& u0, const VectorField& v, double eps, const GeodesicConfig& cfg = {}) {
  if (!(eps > 0.0)) throw std::invalid_argument("dexp_fd: eps must be positive");
  VectorField up = u0, um = u0;
  up.axpy(eps, v);
  um.axpy(-eps, v);
  VectorField d = exp_map(up, 1.0, cfg).displacement();
  d -= exp_map(um, 1.0, cfg).displacement();
  d *= 1.0 / (2.0 * eps);
  return d;
}

struct DexpRichardson {
  VectorField value;  ///< finest difference quotient (eps/4)
  double ratio = 0.0; ///< |D(eps) - D(eps/2)| / |D(eps/2) - D(eps/4)|, near 4 when O(eps^2) dominates
  bool roundoff_suspect = false;
};

/// Step-halving check of dexp_fd; the ratio leaving [1, 16] flags eps as
/// round-off dominated (or too large for the asymptotic regime).
inline DexpRichardson dexp_richardson(const VectorField& u0, const VectorField& v, double eps, double s,
                                      const GeodesicConfig& cfg = {}) {
  VectorField a = dexp_fd(u0, v, eps, cfg);
  VectorField b = dexp_fd(u0, v, 0.5 * eps, cfg);
  VectorField c = dexp_fd(u0, v, 0.25 * eps, cfg);
  double num = sobolev_norm(a - b, s), den = sobolev_norm(b - c, s);
  DexpRichardson r{c, den > 0.0 ? num / den : (num > 0.0 ? INFINITY : 4.0), false};
  r.roundoff_suspect = !(r.ratio >= 1.0 && r.ratio <= 16.0);
  return r;
}

// ---------------------------------------------------------------------------
// Scaling

/// ||E_T(u0) - lambda^{-1} E_{T/lambda}(lambda u0)||_s / ||E_T(u0)||_s with
/// the second run stepped at dt/lambda. lambda = T compares with the time-one
/// map: E_T(u0) = T^{-1} E_1(T u0).
inline double scaling_check(const VectorField& u0, double T, double lambda, const StepperConfig& cfg, double s = 2.5) {
  if (!(lambda > 0.0)) throw std::invalid_argument("scaling_check: lambda must be positive");
  VectorField a = euler_solve(u0, T, cfg, false).states.back().u;
  StepperConfig c2 = cfg;
  c2.dt = cfg.dt / lambda;
  VectorField b = euler_solve(lambda * u0, T / lambda, c2, false).states.back().u;
  b *= 1.0 / lambda;
  double den = sobolev_norm(a, s);
  double num = sobolev_norm(a - b, s);
  if (den == 0.0) return num == 0.0 ? 0.0 : INFINITY;
  return num / den;
}

/// max_t ||lambda u(lambda t; u0) - u(t; lambda u0)||_s / ||u(t; lambda u0)||_s
/// over the common step times.
inline double trajectory_covariance(const VectorField& u0, double T, double lambda, const StepperConfig& cfg,
                                    double s = 2.5) {
  if (!(lambda > 0.0)) throw std::invalid_argument("trajectory_covariance: lambda must be positive");
  auto base = euler_solve(u0, T, cfg).states;
  StepperConfig c2 = cfg;
  c2.dt = cfg.dt / lambda;
  auto scaled = euler_solve(lambda * u0, T / lambda, c2).states;
  if (base.size() != scaled.size()) throw std::logic_error("trajectory_covariance: step counts differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    VectorField want = lambda * base[i].u;
    double den = sobolev_norm(want, s);
    double num = sobolev_norm(scaled[i].u - want, s);
    if (den > 0.0) worst = std::max(worst, num / den);
    else if (num > 0.0) worst = INFINITY;
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Solution map u0 -> u(1; u0)

struct SolutionMapParams {
  /// Center of the window cutting u_base down to compact support; default is
  /// the point (L/4, L/4). x* sits at the antipodal point c + (L/2, L/2).
  std::optional<Point> base_center;
  /// Window radius as a fraction of L.
  double base_radius = 0.2;
  /// Mollifier width as a fraction of L.
  double mollify_eps = 0.02;
  /// Support radius of the direction v as a fraction of L.
  double jet_radius = 0.2;
  double T = 1.0;
  double min_cells = 4.0;
  bool keep_unresolved = false;
  StepperConfig stepper{};
  GeodesicConfig geodesic{};
  double dexp_eps = 1e-3;
  unsigned threads = 0;
};

/// Compactly supported smoothing of a 2D div-free field: the stream function
/// is windowed by a plateau around `center` and the result mollified.
inline VectorField compact_approximation(const VectorField& u, const Point& center, double radius, double eps) {
  const Grid& g = u.grid();
  if (g.dim() != 2) throw std::invalid_argument("compact_approximation: 2D only");
  check_support_in_box(g, center, radius + eps, "compact_approximation");
  // omega = d1 u2 - d2 u1 = Laplacian psi for u = (-d2 psi, d1 psi).
  ScalarField omega = partial_derivative(u[1], 0) - partial_derivative(u[0], 1);
  Spectrum c = omega.spectrum();
  for (std::size_t i = 0; i < c.size(); ++i) {
    double n2 = g.xi_norm2(i);
    c[i] = n2 > 0.0 ? -c[i] / n2 : Complex(0.0);
  }
  ScalarField psi = ScalarField::from_spectrum(g, std::move(c));
  ScalarField window = ScalarField::sample(g, [&](const Point& x) {
    return plateau_profile(periodic_distance(g, x, center) / radius, 0.5);
  });
  for (std::size_t p = 0; p < g.size(); ++p) psi.mutable_values()[p] *= window[p];
  std::vector<ScalarField> comps;
  comps.push_back(-partial_derivative(psi, 1));
  comps.push_back(partial_derivative(psi, 0));
  return mollify(VectorField(std::move(comps)), eps);
}

/// Separation of the time-T solution map near u_bar = compact_approximation
/// of u_base: u_{0,k} = u_bar + w_k, u~_{0,k} = u_{0,k} + v_k with
/// v_k = R/(4k) v, ||v||_s = 1 a jet at x*, and w_k a swirl on B_{rho_k}(x*)
/// with ||w_k||_s = R/4, rho_k = M R/(16 k), M = |d_{u_bar} exp(v)(x*)|.
inline SeparationSeries solution_map_experiment(const VectorField& u_base, double R, int k_max, double s,
                                                const SolutionMapParams& prm = {}) {
  if (!(R > 0.0)) throw std::invalid_argument("solution_map_experiment: R must be positive");
  if (k_max < 1) throw std::invalid_argument("solution_map_experiment: k_max must be at least 1");
  const Grid& g = u_base.grid();
  if (g.dim() != 2) throw std::invalid_argument("solution_map_experiment: 2D only");
  if (sobolev_norm(divergence(u_base), s - 1.0) > 1e-8 * std::max(1.0, sobolev_norm(u_base, s)))
    throw std::invalid_argument("solution_map_experiment: u_base is not divergence free");
  const double Lb = g.length(), h = g.spacing();
  const Point c0 = prm.base_center.value_or(Point{0.25 * Lb, 0.25 * Lb, 0.0});
  const Point star{std::fmod(c0[0] + 0.5 * Lb, Lb), std::fmod(c0[1] + 0.5 * Lb, Lb), 0.0};
  const double rb = prm.base_radius * Lb, eps = prm.mollify_eps * Lb, a = prm.jet_radius * Lb;

  const VectorField ubar = compact_approximation(u_base, c0, rb, eps);
  const VectorField v = div_free_jet(g, star, a, s, 1.0);
  const std::size_t node = detail::nearest_node(g, star);

  // Leakage of u_bar into the jet ball (zero up to spectral tails).
  double remote = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p)
    if (periodic_distance(g, g.position(p), star) < a)
      remote = std::max(remote, std::hypot(ubar[0][p], ubar[1][p]));

  const VectorField dexp = dexp_fd(ubar, v, prm.dexp_eps, prm.geodesic);
  const double M = std::hypot(dexp[0][node], dexp[1][node]);
  auto rho = [&](int k) { return std::min(M * R / (16.0 * k), a); };
  int k_res = 0;
  while (k_res < k_max && rho(k_res + 1) >= prm.min_cells * h) ++k_res;
  const int k_eval = prm.keep_unresolved ? k_max : k_res;

  SeparationSeries out;
  out.construction = "solution-map";
  out.aux_names = {"support_cells", "rho_used", "vorticity_gap", "velocity_per_vorticity"};
  out.k_requested = k_max;
  out.k_resolved = k_res;
  out.watermark_cells = k_res > 0 ? rho(k_res) / h : 0.0;
  out.rows.resize(k_eval);

  for (const auto& f : ubar.components()) (void)f.spectrum();
  for (const auto& f : v.components()) (void)f.spectrum();

  detail::parallel_for(k_eval, prm.threads, [&](int i) {
    const int k = i + 1;
    const bool resolved = k <= k_res;
    const double r_used = resolved ? rho(k) : prm.min_cells * h;
    VectorField u0 = ubar;
    u0 += div_free_bump(g, star, r_used, s, 0.25 * R);
    VectorField vk = v;
    vk *= R / (4.0 * k);
    VectorField ut = u0;
    ut += vk;
    VectorField e = euler_solve(u0, prm.T, prm.stepper, false).states.back().u;
    VectorField et = euler_solve(ut, prm.T, prm.stepper, false).states.back().u;
    SeparationRow row;
    row.k = k;
    row.input_gap = sobolev_norm(u0 - ut, s);
    row.output_gap = sobolev_norm(e - et, s);
    double vort = sobolev_norm(vorticity(e) - vorticity(et), s - 1.0);
    row.aux = {rho(k) / h, r_used, vort, vort > 0.0 ? row.output_gap / vort : 0.0};
    row.resolved = resolved;
    out.rows[i] = std::move(row);
  });

  out.note("R", R);
  out.note("s", s);
  out.note("N", g.n());
  out.note("box", Lb);
  out.note("T", prm.T);
  out.note("dt", prm.stepper.dt);
  out.note("M", M);
  out.note("jet_radius", a);
  out.note("base_radius", rb);
  out.note("support_distance", periodic_distance(g, c0, star) - rb - eps - a);
  out.note("remote_influence", remote);
  out.note("cell", h);
  out.note("min_cells", prm.min_cells);
  out.note("k_resolved", k_res);
  out.note("watermark_cells", out.watermark_cells);
  out.validate();
  return out;
}

} // namespace eulab
