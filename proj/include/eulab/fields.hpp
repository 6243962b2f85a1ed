#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "eulab/spectral.hpp"

namespace eulab {

/// dim scalar components on one grid.
class VectorField {
public:
  explicit VectorField(const Grid& g) : grid_(g) {
    for (int d = 0; d < g.dim(); ++d) comps_.emplace_back(g);
  }
  explicit VectorField(std::vector<ScalarField> comps) : grid_(check(comps)), comps_(std::move(comps)) {}

  template <class Fn>
  static VectorField sample(const Grid& g, Fn&& fn) {
    std::vector<std::vector<double>> v(g.dim(), std::vector<double>(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) {
      Point val = fn(g.position(i));
      for (int d = 0; d < g.dim(); ++d) v[d][i] = val[d];
    }
    std::vector<ScalarField> c;
    for (int d = 0; d < g.dim(); ++d) c.emplace_back(g, std::move(v[d]));
    return VectorField(std::move(c));
  }

  const Grid& grid() const { return grid_; }
  int dim() const { return grid_.dim(); }
  const ScalarField& operator[](int i) const { return comps_[i]; }
  ScalarField& operator[](int i) { return comps_[i]; }
  const std::vector<ScalarField>& components() const { return comps_; }

  bool all_finite() const {
    for (const auto& c : comps_)
      if (!c.all_finite()) return false;
    return true;
  }
  double max_abs() const {
    double m = 0.0;
    for (const auto& c : comps_) m = std::max(m, c.max_abs());
    return m;
  }
  /// Largest pointwise Euclidean length.
  double max_length() const {
    double m = 0.0;
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      double s = 0.0;
      for (const auto& c : comps_) s += c[i] * c[i];
      m = std::max(m, s);
    }
    return std::sqrt(m);
  }

  VectorField& operator+=(const VectorField& o) {
    for (int d = 0; d < dim(); ++d) comps_[d] += o.comps_[d];
    return *this;
  }
  VectorField& operator-=(const VectorField& o) {
    for (int d = 0; d < dim(); ++d) comps_[d] -= o.comps_[d];
    return *this;
  }
  VectorField& operator*=(double a) {
    for (auto& c : comps_) c *= a;
    return *this;
  }
  VectorField& axpy(double a, const VectorField& o) {
    for (int d = 0; d < dim(); ++d) comps_[d].axpy(a, o.comps_[d]);
    return *this;
  }
  friend VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
  friend VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
  friend VectorField operator*(double s, VectorField a) { return a *= s; }

private:
  static Grid check(const std::vector<ScalarField>& c) {
    if (c.empty()) throw std::invalid_argument("VectorField: no components");
    const Grid& g = c.front().grid();
    if (static_cast<int>(c.size()) != g.dim()) throw std::invalid_argument("VectorField: component count != dim");
    for (const auto& f : c) require_same_grid(g, f.grid(), "VectorField");
    return g;
  }

  Grid grid_;
  std::vector<ScalarField> comps_;
};

/// dim x dim scalar entries, row-major. Holds Jacobians and vorticities.
class MatrixField {
public:
  explicit MatrixField(const Grid& g) : grid_(g) {
    for (int e = 0; e < g.dim() * g.dim(); ++e) entries_.emplace_back(g);
  }

  const Grid& grid() const { return grid_; }
  int dim() const { return grid_.dim(); }
  const ScalarField& operator()(int i, int j) const { return entries_[i * dim() + j]; }
  ScalarField& operator()(int i, int j) { return entries_[i * dim() + j]; }
  const std::vector<ScalarField>& entries() const { return entries_; }

  MatrixField& operator+=(const MatrixField& o) {
    for (std::size_t e = 0; e < entries_.size(); ++e) entries_[e] += o.entries_[e];
    return *this;
  }
  MatrixField& operator-=(const MatrixField& o) {
    for (std::size_t e = 0; e < entries_.size(); ++e) entries_[e] -= o.entries_[e];
    return *this;
  }
  MatrixField& operator*=(double a) {
    for (auto& e : entries_) e *= a;
    return *this;
  }
  friend MatrixField operator+(MatrixField a, const MatrixField& b) { return a += b; }
  friend MatrixField operator-(MatrixField a, const MatrixField& b) { return a -= b; }
  friend MatrixField operator*(double s, MatrixField a) { return a *= s; }

  double max_abs() const {
    double m = 0.0;
    for (const auto& e : entries_) m = std::max(m, e.max_abs());
    return m;
  }

  /// max |M + M^T| over grid points and entries.
  double skew_defect() const {
    double m = 0.0;
    for (int i = 0; i < dim(); ++i)
      for (int j = i; j < dim(); ++j) {
        const auto& a = (*this)(i, j);
        const auto& b = (*this)(j, i);
        for (std::size_t p = 0; p < a.size(); ++p) m = std::max(m, std::abs(a[p] + b[p]));
      }
    return m;
  }

private:
  Grid grid_;
  std::vector<ScalarField> entries_;
};

// ---------------------------------------------------------------------------
// Norms

inline double sobolev_norm(const VectorField& u, double s) {
  double acc = 0.0;
  for (const auto& c : u.components()) acc += sobolev_norm2(c.grid(), c.spectrum(), s);
  return std::sqrt(acc);
}

inline double sobolev_norm(const MatrixField& m, double s) {
  double acc = 0.0;
  for (const auto& e : m.entries()) acc += sobolev_norm2(e.grid(), e.spectrum(), s);
  return std::sqrt(acc);
}

inline double sobolev_inner(const VectorField& a, const VectorField& b, double s) {
  double acc = 0.0;
  for (int d = 0; d < a.dim(); ++d) acc += sobolev_inner(a[d], b[d], s);
  return acc;
}

// ---------------------------------------------------------------------------
// Differential operators

inline ScalarField divergence(const VectorField& u) {
  const Grid& g = u.grid();
  Spectrum acc(g.size());
  for (int k = 0; k < g.dim(); ++k) {
    Spectrum d = derivative_spectrum(g, u[k].spectrum(), k);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += d[i];
  }
  return ScalarField::from_spectrum(g, std::move(acc));
}

inline VectorField gradient(const ScalarField& f) {
  std::vector<ScalarField> c;
  for (int k = 0; k < f.grid().dim(); ++k) c.push_back(partial_derivative(f, k));
  return VectorField(std::move(c));
}

/// Entry (i, j) = d_j u_i.
inline MatrixField jacobian(const VectorField& u) {
  MatrixField m(u.grid());
  for (int i = 0; i < u.dim(); ++i)
    for (int j = 0; j < u.dim(); ++j) m(i, j) = partial_derivative(u[i], j);
  return m;
}

/// (u . grad) u with every product 2/3-truncated.
inline VectorField advect(const VectorField& u) {
  const Grid& g = u.grid();
  const MatrixField du = jacobian(u);
  std::vector<ScalarField> out;
  for (int i = 0; i < g.dim(); ++i) {
    Spectrum acc(g.size());
    for (int k = 0; k < g.dim(); ++k) {
      Spectrum p = dealiased_product_spectrum(u[k], du(i, k));
      for (std::size_t m = 0; m < acc.size(); ++m) acc[m] += p[m];
    }
    out.push_back(ScalarField::from_spectrum(g, std::move(acc)));
  }
  return VectorField(std::move(out));
}

/// L^2-orthogonal projection onto divergence-free fields; the mean mode is kept.
inline VectorField leray_project(const VectorField& u) {
  const Grid& g = u.grid();
  const int n = g.dim();
  std::vector<Spectrum> in;
  for (int d = 0; d < n; ++d) in.push_back(u[d].spectrum());
  std::vector<Spectrum> out(n, Spectrum(g.size()));
  for (std::size_t m = 0; m < g.size(); ++m) {
    Point xi = g.xi(m);
    double n2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
    if (n2 == 0.0) {
      for (int d = 0; d < n; ++d) out[d][m] = in[d][m];
      continue;
    }
    Complex dot = 0.0;
    for (int d = 0; d < n; ++d) dot += xi[d] * in[d][m];
    for (int d = 0; d < n; ++d) out[d][m] = in[d][m] - xi[d] * dot / n2;
  }
  std::vector<ScalarField> c;
  for (int d = 0; d < n; ++d) c.push_back(ScalarField::from_spectrum(g, std::move(out[d])));
  return VectorField(std::move(c));
}

/// Omega_ij = d_j u_i - d_i u_j.
inline MatrixField vorticity(const VectorField& u) {
  MatrixField du = jacobian(u);
  MatrixField om(u.grid());
  for (int i = 0; i < u.dim(); ++i)
    for (int j = 0; j < u.dim(); ++j) om(i, j) = du(i, j) - du(j, i);
  return om;
}

/// Mean-free divergence-free velocity with the given vorticity, computed from
/// u_l(xi) = -i sum_j Omega_lj(xi) xi_j / |xi|^2.
inline VectorField biot_savart(const MatrixField& omega, double tolerance = 1e-10) {
  const Grid& g = omega.grid();
  const int n = g.dim();
  const double scale = std::max(omega.max_abs(), 1e-300);
  if (omega.skew_defect() > tolerance * scale)
    throw std::invalid_argument("biot_savart: vorticity is not skew-symmetric");
  for (const auto& e : omega.entries())
    if (std::abs(e.spectrum()[0]) > tolerance * scale)
      throw std::invalid_argument("biot_savart: vorticity has nonzero mean");
  std::vector<Spectrum> out(n, Spectrum(g.size()));
  for (int l = 0; l < n; ++l) {
    for (int j = 0; j < n; ++j) {
      const Spectrum& c = omega(l, j).spectrum();
      for (std::size_t m = 0; m < g.size(); ++m) {
        double n2 = g.xi_norm2(m);
        if (n2 == 0.0) continue;
        Index ix = g.unravel(m);
        if (g.is_nyquist(ix[j])) continue;
        double xij = g.wavenumber(ix[j]) * g.xi_unit();
        out[l][m] += Complex(0.0, -1.0) * c[m] * (xij / n2);
      }
    }
  }
  std::vector<ScalarField> comps;
  for (int l = 0; l < n; ++l) comps.push_back(ScalarField::from_spectrum(g, std::move(out[l])));
  return VectorField(std::move(comps));
}

// ---------------------------------------------------------------------------
// Bumps and mollifiers

/// Unnormalized radial profile exp(-1/(1-t^2)) on |t| < 1, the shape of
/// exp(-r^2/(r^2-|y-x|^2)) after rescaling by r.
inline double bump_profile(double t) {
  double t2 = t * t;
  if (t2 >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - t2));
}

inline void check_support_in_box(const Grid& g, const Point& center, double r, const char* where) {
  if (!(r > 0.0)) throw std::invalid_argument(std::string(where) + ": radius must be positive");
  for (int d = 0; d < g.dim(); ++d)
    if (center[d] - r < 0.0 || center[d] + r > g.length())
      throw std::invalid_argument(std::string(where) + ": support ball crosses the box boundary");
}

/// amplitude * exp(-r^2/(r^2 - |y - center|^2)) inside the ball, 0 outside.
inline ScalarField bump(const Grid& g, const Point& center, double r, double amplitude) {
  check_support_in_box(g, center, r, "bump");
  return ScalarField::sample(g, [&](const Point& y) {
    double d2 = 0.0;
    for (int k = 0; k < g.dim(); ++k) d2 += (y[k] - center[k]) * (y[k] - center[k]);
    return amplitude * bump_profile(std::sqrt(d2) / r);
  });
}

namespace detail {

// Fourier transform of the unit-mass radial mollifier, rho_hat(eta) with
// rho_hat(0) = 1, by composite Simpson quadrature on [0, 1].
class MollifierTransform {
public:
  explicit MollifierTransform(int dim) : dim_(dim) { mass_ = radial(0.0); }

  double operator()(double eta) const { return radial(eta) / mass_; }

private:
  double radial(double eta) const {
    constexpr int kPanels = 2000;
    const double h = 1.0 / kPanels;
    double acc = 0.0;
    for (int i = 0; i <= kPanels; ++i) {
      double r = i * h;
      double w = (i == 0 || i == kPanels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += w * integrand(r, eta);
    }
    return acc * h / 3.0;
  }
  double integrand(double r, double eta) const {
    double p = bump_profile(r);
    if (dim_ == 2) return 2.0 * std::numbers::pi * r * p * std::cyl_bessel_j(0.0, eta * r);
    double x = eta * r;
    double sinc = x == 0.0 ? 1.0 : std::sin(x) / x;
    return 4.0 * std::numbers::pi * r * r * p * sinc;
  }

  int dim_;
  double mass_;
};

} // namespace detail

/// J_eps f: convolution with the rescaled unit-mass bump, applied as the
/// multiplier rho_hat(eps |xi|).
inline ScalarField mollify(const ScalarField& f, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("mollify: eps must be positive");
  const Grid& g = f.grid();
  detail::MollifierTransform rho(g.dim());
  std::map<double, double> memo;
  Spectrum c = f.spectrum();
  for (std::size_t i = 0; i < c.size(); ++i) {
    double n2 = g.xi_norm2(i);
    auto it = memo.find(n2);
    if (it == memo.end()) it = memo.emplace(n2, rho(eps * std::sqrt(n2))).first;
    c[i] *= it->second;
  }
  return ScalarField::from_spectrum(g, std::move(c));
}

inline VectorField mollify(const VectorField& u, double eps) {
  std::vector<ScalarField> c;
  for (const auto& f : u.components()) c.push_back(mollify(f, eps));
  return VectorField(std::move(c));
}

/// Divergence-free field supported (up to spectral leakage) in B_r(center).
/// 2D: perpendicular gradient (-d2 psi, d1 psi) of a bump psi; 3D: curl of
/// (0, 0, psi). Scaled so that ||result||_s = target_norm.
inline VectorField div_free_bump(const Grid& g, const Point& center, double r, double s,
                                 double target_norm = 1.0) {
  ScalarField psi = bump(g, center, r, 1.0);
  std::vector<ScalarField> c;
  c.push_back(-partial_derivative(psi, 1));
  c.push_back(partial_derivative(psi, 0));
  if (g.dim() == 3) c.push_back(ScalarField(g));
  VectorField v(std::move(c));
  double nrm = sobolev_norm(v, s);
  if (!(nrm > 0.0)) throw std::invalid_argument("div_free_bump: bump is not resolved on this grid");
  v *= target_norm / nrm;
  return v;
}

/// Smooth radial step: 1 on |t| <= flat, 0 on |t| >= 1, C-infinity between.
inline double plateau_profile(double t, double flat = 0.5) {
  if (!(flat >= 0.0 && flat < 1.0)) throw std::invalid_argument("plateau_profile: flat must lie in [0, 1)");
  t = std::abs(t);
  if (t <= flat) return 1.0;
  if (t >= 1.0) return 0.0;
  double u = (1.0 - t) / (1.0 - flat);
  double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
  return a / (a + b);
}

/// Divergence-free jet through center: perpendicular gradient of
/// psi = -(x2 - c2) beta(x), so the field equals (beta(c), 0) at the center.
/// beta is the bump profile, or the plateau profile when flat > 0.
inline VectorField div_free_jet(const Grid& g, const Point& center, double r, double s, double target_norm = 1.0,
                                double flat = 0.0) {
  check_support_in_box(g, center, r, "div_free_jet");
  ScalarField psi = ScalarField::sample(g, [&](const Point& y) {
    double d2 = 0.0;
    for (int k = 0; k < g.dim(); ++k) d2 += (y[k] - center[k]) * (y[k] - center[k]);
    double t = std::sqrt(d2) / r;
    return -(y[1] - center[1]) * (flat > 0.0 ? plateau_profile(t, flat) : bump_profile(t));
  });
  std::vector<ScalarField> c;
  c.push_back(-partial_derivative(psi, 1));
  c.push_back(partial_derivative(psi, 0));
  if (g.dim() == 3) c.push_back(ScalarField(g));
  VectorField v(std::move(c));
  double nrm = sobolev_norm(v, s);
  if (!(nrm > 0.0)) throw std::invalid_argument("div_free_jet: jet is not resolved on this grid");
  v *= target_norm / nrm;
  return v;
}

// ---------------------------------------------------------------------------
// Reference fields

/// (sin x1 cos x2, -cos x1 sin x2) scaled to the box, stationary for Euler.
inline VectorField taylor_green(const Grid& g, double amplitude = 1.0) {
  if (g.dim() != 2) throw std::invalid_argument("taylor_green: 2D only");
  const double k = g.xi_unit();
  return VectorField::sample(g, [&](const Point& x) {
    return Point{amplitude * std::sin(k * x[0]) * std::cos(k * x[1]),
                 -amplitude * std::cos(k * x[0]) * std::sin(k * x[1]), 0.0};
  });
}

/// Random real field with Gaussian coefficients on lattice modes 0 < |k| <= kmax
/// (lattice units) and amplitude decaying like (1+|k|^2)^(-decay/2); mean zero.
template <class Rng>
ScalarField random_scalar(const Grid& g, Rng& rng, int kmax, double decay = 2.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Spectrum c(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Index ix = g.unravel(i);
    int k2 = 0;
    for (int d = 0; d < g.dim(); ++d) k2 += g.wavenumber(ix[d]) * g.wavenumber(ix[d]);
    if (k2 == 0 || k2 > kmax * kmax) continue;
    double a = std::pow(1.0 + k2, -0.5 * decay);
    c[i] = Complex(a * normal(rng), a * normal(rng));
  }
  // Hermitian symmetrization makes the synthesized samples exactly real.
  Spectrum h(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Index ix = g.unravel(i);
    Index mirror{0, 0, 0};
    for (int d = 0; d < g.dim(); ++d) mirror[d] = (g.n() - ix[d]) % g.n();
    h[i] = 0.5 * (c[i] + std::conj(c[g.ravel(mirror)]));
  }
  return ScalarField::from_spectrum(g, std::move(h));
}

template <class Rng>
VectorField random_vector(const Grid& g, Rng& rng, int kmax, double decay = 2.0) {
  std::vector<ScalarField> c;
  for (int d = 0; d < g.dim(); ++d) c.push_back(random_scalar(g, rng, kmax, decay));
  return VectorField(std::move(c));
}

/// Random mean-free divergence-free field, optionally normalized in H^s.
template <class Rng>
VectorField random_div_free(const Grid& g, Rng& rng, int kmax, double decay = 2.0, double s = -1.0,
                            double target_norm = 1.0) {
  VectorField u = leray_project(random_vector(g, rng, kmax, decay));
  if (s >= 0.0) u *= target_norm / sobolev_norm(u, s);
  return u;
}

} // namespace eulab
