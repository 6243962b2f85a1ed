#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "eulab/fft.hpp"
#include "eulab/spectral.hpp"

namespace eulab {

enum class InterpKind { CubicSpline, QuinticSpline, Fourier };

/// Interpolation used by composition. Spline kinds may first upsample the
/// field spectrally by `oversample` (a power of two) and then fit the spline on
/// the finer lattice, which reduces the error by oversample^order.
struct InterpConfig {
  InterpKind kind = InterpKind::CubicSpline;
  int oversample = 1;
};

namespace detail {

// Tensor weights of centered B-splines of degree 3 and 5 for fractional
// offset t in [0, 1). Node j of the stencil sits at floor(u) + j - (order-1)/2.
inline void cubic_weights(double t, double* w, double* dw) {
  const double t2 = t * t, t3 = t2 * t, s = 1.0 - t;
  w[0] = s * s * s / 6.0;
  w[1] = (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0;
  w[2] = (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0;
  w[3] = t3 / 6.0;
  if (dw) {
    dw[0] = -0.5 * s * s;
    dw[1] = 1.5 * t2 - 2.0 * t;
    dw[2] = -1.5 * t2 + t + 0.5;
    dw[3] = 0.5 * t2;
  }
}

inline void quintic_weights(double t, double* w, double* dw) {
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t, s = 1.0 - t;
  w[0] = s * s * s * s * s / 120.0;
  w[1] = (26.0 - 50.0 * t + 20.0 * t2 + 20.0 * t3 - 20.0 * t4 + 5.0 * t5) / 120.0;
  w[2] = (66.0 - 60.0 * t2 + 30.0 * t4 - 10.0 * t5) / 120.0;
  w[3] = (26.0 + 50.0 * t + 20.0 * t2 - 20.0 * t3 - 20.0 * t4 + 10.0 * t5) / 120.0;
  w[4] = (1.0 + 5.0 * t + 10.0 * t2 + 10.0 * t3 + 5.0 * t4 - 5.0 * t5) / 120.0;
  w[5] = t5 / 120.0;
  if (dw) {
    dw[0] = -s * s * s * s / 24.0;
    dw[1] = (-50.0 + 40.0 * t + 60.0 * t2 - 80.0 * t3 + 25.0 * t4) / 120.0;
    dw[2] = (-120.0 * t + 120.0 * t3 - 50.0 * t4) / 120.0;
    dw[3] = (50.0 + 40.0 * t - 60.0 * t2 - 80.0 * t3 + 50.0 * t4) / 120.0;
    dw[4] = (5.0 + 20.0 * t + 30.0 * t2 + 20.0 * t3 - 25.0 * t4) / 120.0;
    dw[5] = t4 / 24.0;
  }
}

inline double spline_symbol(InterpKind kind, double theta) {
  if (kind == InterpKind::CubicSpline) return (2.0 + std::cos(theta)) / 3.0;
  return (66.0 + 52.0 * std::cos(theta) + 2.0 * std::cos(2.0 * theta)) / 120.0;
}

} // namespace detail

/// Periodic interpolant of a ScalarField, evaluable at arbitrary points
/// (coordinates are wrapped into the box).
class PeriodicInterpolant {
public:
  PeriodicInterpolant(const ScalarField& f, InterpConfig cfg = {}) : grid_(f.grid()), cfg_(cfg) {
    if (cfg.oversample < 1 || (cfg.oversample & (cfg.oversample - 1)) != 0)
      throw std::invalid_argument("InterpConfig: oversample must be a power of two");
    if (cfg_.kind == InterpKind::Fourier) {
      coeffs_ = f.spectrum();
      return;
    }
    order_ = cfg_.kind == InterpKind::CubicSpline ? 4 : 6;
    const int n = grid_.n();
    m_ = n * cfg_.oversample;
    const int dim = grid_.dim();
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(m_);
    const Spectrum& src = f.spectrum();
    Spectrum fine(total);
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i] == Complex(0.0)) continue;
      Index ix = grid_.unravel(i);
      // A Nyquist slot is split evenly between +n/2 and -n/2 on the fine lattice.
      int nyq = 0;
      for (int d = 0; d < dim; ++d)
        if (grid_.is_nyquist(ix[d]) && cfg_.oversample > 1) ++nyq;
      const double share = 1.0 / static_cast<double>(1 << nyq);
      for (int mask = 0; mask < (1 << nyq); ++mask) {
        std::size_t idx = 0;
        int bit = 0;
        for (int d = 0; d < dim; ++d) {
          int k = grid_.wavenumber(ix[d]);
          if (grid_.is_nyquist(ix[d]) && cfg_.oversample > 1) {
            if ((mask >> bit) & 1) k = -k;
            ++bit;
          }
          int slot = ((k % m_) + m_) % m_;
          idx = idx * static_cast<std::size_t>(m_) + static_cast<std::size_t>(slot);
        }
        fine[idx] += share * src[i];
      }
    }
    for (std::size_t i = 0; i < total; ++i) {
      double denom = 1.0;
      std::size_t rem = i;
      for (int d = dim - 1; d >= 0; --d) {
        int slot = static_cast<int>(rem % static_cast<std::size_t>(m_));
        rem /= static_cast<std::size_t>(m_);
        double theta = 2.0 * std::numbers::pi * slot / m_;
        denom *= detail::spline_symbol(cfg_.kind, theta);
      }
      fine[i] /= denom;
    }
    Spectrum c = inverse_fft_complex(dim, m_, std::move(fine));
    spline_.resize(total);
    for (std::size_t i = 0; i < total; ++i) spline_[i] = c[i].real();
    h_ = grid_.length() / m_;
  }

  const Grid& grid() const { return grid_; }

  double operator()(const Point& x) const { return eval(x, nullptr); }

  /// Value and gradient at x.
  double value_gradient(const Point& x, Point& grad) const { return eval(x, &grad); }

private:
  double eval(const Point& x, Point* grad) const {
    if (cfg_.kind == InterpKind::Fourier) return eval_fourier(x, grad);
    const int dim = grid_.dim();
    std::array<std::array<double, 6>, 3> w{}, dw{};
    std::array<int, 3> base{0, 0, 0};
    const int half = (order_ - 1) / 2;
    for (int d = 0; d < dim; ++d) {
      double u = x[d] / h_;
      double fl = std::floor(u);
      double t = u - fl;
      base[d] = static_cast<int>(fl) - half;
      if (order_ == 4)
        detail::cubic_weights(t, w[d].data(), grad ? dw[d].data() : nullptr);
      else
        detail::quintic_weights(t, w[d].data(), grad ? dw[d].data() : nullptr);
    }
    auto wrap = [this](int i) { return ((i % m_) + m_) % m_; };
    double val = 0.0;
    Point g{0.0, 0.0, 0.0};
    if (dim == 2) {
      for (int a = 0; a < order_; ++a) {
        const std::size_t row = static_cast<std::size_t>(wrap(base[0] + a)) * m_;
        double sa = 0.0, sa_d = 0.0;
        for (int b = 0; b < order_; ++b) {
          double c = spline_[row + wrap(base[1] + b)];
          sa += w[1][b] * c;
          if (grad) sa_d += dw[1][b] * c;
        }
        val += w[0][a] * sa;
        if (grad) {
          g[0] += dw[0][a] * sa;
          g[1] += w[0][a] * sa_d;
        }
      }
    } else {
      for (int a = 0; a < order_; ++a) {
        for (int b = 0; b < order_; ++b) {
          const std::size_t row =
              (static_cast<std::size_t>(wrap(base[0] + a)) * m_ + wrap(base[1] + b)) * static_cast<std::size_t>(m_);
          double sc = 0.0, sc_d = 0.0;
          for (int c3 = 0; c3 < order_; ++c3) {
            double c = spline_[row + wrap(base[2] + c3)];
            sc += w[2][c3] * c;
            if (grad) sc_d += dw[2][c3] * c;
          }
          val += w[0][a] * w[1][b] * sc;
          if (grad) {
            g[0] += dw[0][a] * w[1][b] * sc;
            g[1] += w[0][a] * dw[1][b] * sc;
            g[2] += w[0][a] * w[1][b] * sc_d;
          }
        }
      }
    }
    if (grad) {
      for (int d = 0; d < dim; ++d) g[d] /= h_;
      *grad = g;
    }
    return val;
  }

  // Direct trigonometric sum; exact for band-limited fields, O(N^d) per point.
  double eval_fourier(const Point& x, Point* grad) const {
    const int dim = grid_.dim();
    const int n = grid_.n();
    std::array<std::vector<Complex>, 3> e;
    for (int d = 0; d < dim; ++d) {
      e[d].resize(n);
      for (int i = 0; i < n; ++i) e[d][i] = std::polar(1.0, grid_.wavenumber(i) * grid_.xi_unit() * x[d]);
    }
    Complex val = 0.0;
    std::array<Complex, 3> g{};
    for (std::size_t m = 0; m < coeffs_.size(); ++m) {
      if (coeffs_[m] == Complex(0.0)) continue;
      Index ix = grid_.unravel(m);
      Complex ph = coeffs_[m];
      for (int d = 0; d < dim; ++d) ph *= e[d][ix[d]];
      val += ph;
      if (grad)
        for (int d = 0; d < dim; ++d)
          if (!grid_.is_nyquist(ix[d])) g[d] += Complex(0.0, grid_.wavenumber(ix[d]) * grid_.xi_unit()) * ph;
    }
    if (grad) *grad = Point{g[0].real(), g[1].real(), g[2].real()};
    return val.real();
  }

  Grid grid_;
  InterpConfig cfg_;
  int order_ = 0;
  int m_ = 0;
  double h_ = 0.0;
  std::vector<double> spline_;
  Spectrum coeffs_;
};

/// Samples f at the given points.
inline std::vector<double> interpolate_at(const ScalarField& f, const std::vector<Point>& pts, InterpConfig cfg = {}) {
  PeriodicInterpolant ip(f, cfg);
  std::vector<double> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) out[i] = ip(pts[i]);
  return out;
}

} // namespace eulab
