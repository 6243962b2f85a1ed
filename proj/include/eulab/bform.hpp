#pragma once

#include <iostream>
#include <stdexcept>

#include "eulab/fields.hpp"

namespace eulab {

/// The quadratic pressure surrogate B = B1 + B2.
///
///   B1(u) = sum_{i,k} chi(D) Delta^{-1} d_i d_k (u_i u_k)     (low band, |xi| <= cutoff)
///   B2(u) = sum_{i,k} Delta^{-1} (1 - chi(D)) (d_i u_k d_k u_i) (high band)
///
/// One cutoff radius feeds both pieces so that Delta B(u) equals
/// sum d_i u_k d_k u_i whenever div u = 0, for any radius.
class BAssembly {
public:
  explicit BAssembly(double cutoff = 1.0) : cutoff_(cutoff) {
    if (!(cutoff > 0.0)) throw std::invalid_argument("BAssembly: cutoff must be positive");
  }

  double cutoff() const { return cutoff_; }

  Spectrum b1_spectrum(const VectorField& u) const {
    const Grid& g = u.grid();
    const int n = g.dim();
    const double r2 = cutoff_ * cutoff_;
    Spectrum acc(g.size());
    for (int i = 0; i < n; ++i) {
      for (int k = i; k < n; ++k) {
        Spectrum p = dealiased_product_spectrum(u[i], u[k]);
        const double mult = (i == k) ? 1.0 : 2.0;
        for (std::size_t m = 0; m < g.size(); ++m) {
          double n2 = g.xi_norm2(m);
          if (n2 == 0.0 || n2 > r2) continue;
          Point xi = g.xi(m);
          acc[m] += mult * (xi[i] * xi[k] / n2) * p[m];
        }
      }
    }
    return acc;
  }

  Spectrum b2_spectrum(const VectorField& u) const {
    const Grid& g = u.grid();
    const MatrixField du = jacobian(u);
    Spectrum acc(g.size());
    for (int i = 0; i < g.dim(); ++i)
      for (int k = 0; k < g.dim(); ++k) {
        Spectrum p = dealiased_product_spectrum(du(k, i), du(i, k));
        for (std::size_t m = 0; m < g.size(); ++m) acc[m] += p[m];
      }
    return inv_laplace_highpass_symbol(g, acc, cutoff_);
  }

  ScalarField b1(const VectorField& u) const { return ScalarField::from_spectrum(u.grid(), b1_spectrum(u)); }
  ScalarField b2(const VectorField& u) const { return ScalarField::from_spectrum(u.grid(), b2_spectrum(u)); }

  Spectrum b_spectrum(const VectorField& u) const {
    Spectrum a = b1_spectrum(u);
    Spectrum c = b2_spectrum(u);
    for (std::size_t m = 0; m < a.size(); ++m) a[m] += c[m];
    return a;
  }

  ScalarField b(const VectorField& u) const { return ScalarField::from_spectrum(u.grid(), b_spectrum(u)); }

  VectorField grad_b(const VectorField& u) const {
    const Grid& g = u.grid();
    Spectrum c = b_spectrum(u);
    std::vector<ScalarField> out;
    for (int d = 0; d < g.dim(); ++d) out.push_back(ScalarField::from_spectrum(g, derivative_spectrum(g, c, d)));
    return VectorField(std::move(out));
  }

  /// Symmetric bilinear form by polarization, (B(f+g) - B(f-g))/4.
  ScalarField b_bilinear(const VectorField& f, const VectorField& h) const {
    ScalarField out = b(f + h);
    out -= b(f - h);
    out *= 0.25;
    return out;
  }

  /// p = -B(u). The identification with the Euler pressure requires div u = 0;
  /// a warning is written to `warn` when ||div u||_0 exceeds div_tolerance * ||u||_1.
  ScalarField pressure_from(const VectorField& u, double div_tolerance = 1e-8,
                            std::ostream* warn = &std::cerr) const {
    double dv = sobolev_norm(divergence(u), 0.0);
    double scale = sobolev_norm(u, 1.0);
    if (warn && dv > div_tolerance * std::max(scale, 1e-300))
      *warn << "eulab: pressure_from: ||div u|| = " << dv << " exceeds tolerance; B(u) is not the pressure\n";
    ScalarField p = b(u);
    p *= -1.0;
    return p;
  }

private:
  double cutoff_;
};

} // namespace eulab
