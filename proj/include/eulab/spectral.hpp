#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "eulab/fft.hpp"
#include "eulab/grid.hpp"

namespace eulab {

/// Real samples on a periodic grid with a lazily computed spectrum.
///
/// The spectrum is cached on first use and dropped by any mutable access to
/// the samples. Concurrent readers of one field are safe.
class ScalarField {
public:
  explicit ScalarField(const Grid& g) : grid_(g), values_(g.size(), 0.0) {}

  ScalarField(const Grid& g, std::vector<double> samples) : grid_(g), values_(std::move(samples)) {
    if (values_.size() != g.size()) throw std::invalid_argument("ScalarField: sample count does not match grid");
  }

  ScalarField(const ScalarField& o) : grid_(o.grid_), values_(o.values_), cache_(o.cached()) {}
  ScalarField(ScalarField&& o) noexcept
      : grid_(o.grid_), values_(std::move(o.values_)), cache_(std::move(o.cache_)) {}
  ScalarField& operator=(const ScalarField& o) {
    if (this != &o) {
      grid_ = o.grid_;
      values_ = o.values_;
      auto c = o.cached();
      std::lock_guard<std::mutex> lock(mutex_);
      cache_ = std::move(c);
    }
    return *this;
  }
  ScalarField& operator=(ScalarField&& o) noexcept {
    grid_ = o.grid_;
    values_ = std::move(o.values_);
    std::lock_guard<std::mutex> lock(mutex_);
    cache_ = std::move(o.cache_);
    return *this;
  }

  /// Builds a field from spectral coefficients (normalized convention). The
  /// given coefficients become the cached spectrum.
  static ScalarField from_spectrum(const Grid& g, Spectrum coeffs) {
    if (coeffs.size() != g.size()) throw std::invalid_argument("ScalarField: spectrum size does not match grid");
    ScalarField f(g, inverse_fft(g, coeffs));
    f.cache_ = std::make_shared<const Spectrum>(std::move(coeffs));
    return f;
  }

  template <class Fn>
  static ScalarField sample(const Grid& g, Fn&& fn) {
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(g.position(i));
    return ScalarField(g, std::move(v));
  }

  static ScalarField constant(const Grid& g, double c) { return ScalarField(g, std::vector<double>(g.size(), c)); }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Mutable access; drops the cached spectrum.
  std::span<double> mutable_values() {
    invalidate();
    return values_;
  }

  const Spectrum& spectrum() const {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!cache_) cache_ = std::make_shared<const Spectrum>(forward_fft(grid_, values_));
    return *cache_;
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : values_) m = std::max(m, std::abs(x));
    return m;
  }

  double mean() const {
    double s = 0.0;
    for (double x : values_) s += x;
    return s / static_cast<double>(values_.size());
  }

  ScalarField& operator+=(const ScalarField& o) {
    require_same_grid(grid_, o.grid_, "ScalarField::operator+=");
    invalidate();
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    require_same_grid(grid_, o.grid_, "ScalarField::operator-=");
    invalidate();
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  ScalarField& operator*=(double a) {
    auto c = cached();
    for (double& x : values_) x *= a;
    std::lock_guard<std::mutex> lock(mutex_);
    if (c) {
      auto s = std::make_shared<Spectrum>(*c);
      for (auto& z : *s) z *= a;
      cache_ = std::move(s);
    }
    return *this;
  }

  /// Adds a*o in place.
  ScalarField& axpy(double a, const ScalarField& o) {
    require_same_grid(grid_, o.grid_, "ScalarField::axpy");
    invalidate();
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * o.values_[i];
    return *this;
  }

  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
  friend ScalarField operator-(ScalarField a) { return a *= -1.0; }

private:
  std::shared_ptr<const Spectrum> cached() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_;
  }
  void invalidate() {
    std::lock_guard<std::mutex> lock(mutex_);
    cache_.reset();
  }

  Grid grid_;
  std::vector<double> values_;
  mutable std::shared_ptr<const Spectrum> cache_;
  mutable std::mutex mutex_;
};

/// A real, even Fourier symbol evaluated at physical wavenumbers.
struct SpectralMultiplier {
  std::function<double(const Point& xi)> symbol;

  static SpectralMultiplier ball_indicator(double radius) {
    return {[radius](const Point& xi) {
      return xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2] <= radius * radius ? 1.0 : 0.0;
    }};
  }

  /// xi_i xi_k / |xi|^2, zero at xi = 0 (axes are 0-based).
  static SpectralMultiplier riesz_pair(int i, int k) {
    return {[i, k](const Point& xi) {
      double n2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
      return n2 == 0.0 ? 0.0 : xi[i] * xi[k] / n2;
    }};
  }
};

inline Spectrum apply_symbol(const Grid& g, const Spectrum& in, const std::function<double(const Point&)>& symbol) {
  Spectrum out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    double m = symbol(g.xi(i));
    out[i] = m == 0.0 ? Complex(0.0) : in[i] * m;
  }
  return out;
}

inline ScalarField apply_multiplier(const SpectralMultiplier& m, const ScalarField& f) {
  return ScalarField::from_spectrum(f.grid(), apply_symbol(f.grid(), f.spectrum(), m.symbol));
}

/// Weighted squared coefficient sum: sum_k (1+|xi_k|^2)^s |c_k|^2.
inline double sobolev_norm2(const Grid& g, const Spectrum& c, double s) {
  if (!std::isfinite(s)) throw std::invalid_argument("sobolev_norm: s must be finite");
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    double a = std::norm(c[i]);
    if (a == 0.0) continue;
    acc += (s == 0.0 ? 1.0 : std::pow(1.0 + g.xi_norm2(i), s)) * a;
  }
  return acc;
}

inline double sobolev_norm(const ScalarField& f, double s) { return std::sqrt(sobolev_norm2(f.grid(), f.spectrum(), s)); }

/// Real part of sum_k (1+|xi|^2)^s f_k conj(g_k).
inline double sobolev_inner(const ScalarField& f, const ScalarField& h, double s) {
  require_same_grid(f.grid(), h.grid(), "sobolev_inner");
  const auto& a = f.spectrum();
  const auto& b = h.spectrum();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += std::pow(1.0 + f.grid().xi_norm2(i), s) * (a[i] * std::conj(b[i])).real();
  return acc;
}

/// Discrete L^2 pairing (1/N^d) sum f g, equal to sobolev_inner(f, g, 0).
inline double l2_pairing(const ScalarField& f, const ScalarField& h) {
  require_same_grid(f.grid(), h.grid(), "l2_pairing");
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * h[i];
  return acc / static_cast<double>(f.size());
}

inline ScalarField chi_cutoff(const ScalarField& f, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("chi_cutoff: radius must be positive");
  const Grid& g = f.grid();
  Spectrum c = f.spectrum();
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (g.xi_norm2(i) > r2) c[i] = 0.0;
  return ScalarField::from_spectrum(g, std::move(c));
}

/// Symbol -(1 - chi(xi))/|xi|^2; zero inside the closed ball of the given radius.
inline Spectrum inv_laplace_highpass_symbol(const Grid& g, const Spectrum& in, double radius = 1.0) {
  Spectrum c(in.size());
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < c.size(); ++i) {
    double n2 = g.xi_norm2(i);
    c[i] = n2 <= r2 ? Complex(0.0) : -in[i] / n2;
  }
  return c;
}

inline ScalarField inv_laplace_highpass(const ScalarField& f, double radius = 1.0) {
  return ScalarField::from_spectrum(f.grid(), inv_laplace_highpass_symbol(f.grid(), f.spectrum(), radius));
}

/// chi_k(D): keeps modes with |xi| <= k (physical wavenumber).
inline ScalarField spectral_truncate(const ScalarField& f, int k) {
  if (k < 1) throw std::invalid_argument("spectral_truncate: k must be >= 1");
  return chi_cutoff(f, static_cast<double>(k));
}

/// Spectral derivative along 0-based axis; the Nyquist slot of that axis is zeroed.
inline Spectrum derivative_spectrum(const Grid& g, const Spectrum& in, int axis) {
  if (axis < 0 || axis >= g.dim()) throw std::invalid_argument("partial_derivative: invalid axis");
  Spectrum out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    Index ix = g.unravel(i);
    if (g.is_nyquist(ix[axis])) {
      out[i] = 0.0;
      continue;
    }
    double k = g.wavenumber(ix[axis]) * g.xi_unit();
    out[i] = Complex(0.0, k) * in[i];
  }
  return out;
}

inline ScalarField partial_derivative(const ScalarField& f, int axis) {
  return ScalarField::from_spectrum(f.grid(), derivative_spectrum(f.grid(), f.spectrum(), axis));
}

/// 2/3-rule truncation: zero every mode with some |k_j| > Grid::dealias_max().
inline void dealias_in_place(const Grid& g, Spectrum& c) {
  const int kmax = g.dealias_max();
  for (std::size_t i = 0; i < c.size(); ++i) {
    Index ix = g.unravel(i);
    for (int d = 0; d < g.dim(); ++d) {
      if (std::abs(g.wavenumber(ix[d])) > kmax) {
        c[i] = 0.0;
        break;
      }
    }
  }
}

inline ScalarField dealias(const ScalarField& f) {
  Spectrum c = f.spectrum();
  dealias_in_place(f.grid(), c);
  return ScalarField::from_spectrum(f.grid(), std::move(c));
}

/// Spectrum of the pointwise product a*b with the 2/3 truncation applied.
inline Spectrum dealiased_product_spectrum(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid(), b.grid(), "product");
  std::vector<double> p(a.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = a[i] * b[i];
  Spectrum c = forward_fft(a.grid(), p);
  dealias_in_place(a.grid(), c);
  return c;
}

inline ScalarField dealiased_product(const ScalarField& a, const ScalarField& b) {
  return ScalarField::from_spectrum(a.grid(), dealiased_product_spectrum(a, b));
}

/// Largest |c_k| over modes outside the ball of the given radius.
inline double max_coefficient_outside(const ScalarField& f, double radius) {
  const auto& c = f.spectrum();
  double m = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (f.grid().xi_norm2(i) > radius * radius) m = std::max(m, std::abs(c[i]));
  return m;
}

inline double max_coefficient_inside(const ScalarField& f, double radius) {
  const auto& c = f.spectrum();
  double m = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (f.grid().xi_norm2(i) <= radius * radius) m = std::max(m, std::abs(c[i]));
  return m;
}

} // namespace eulab
