#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

namespace eulab {

using Complex = std::complex<double>;

/// A point (or wavenumber vector) in up to three dimensions. Only the first
/// `Grid::dim()` entries are meaningful.
using Point = std::array<double, 3>;

/// Multi-index of a grid node, axis 0 varies slowest.
using Index = std::array<int, 3>;

class Grid {
public:
  Grid(int dim, int points_per_axis, double box_length)
      : dim_(dim), n_(points_per_axis), length_(box_length) {
    if (dim != 2 && dim != 3)
      throw std::invalid_argument("Grid: dim must be 2 or 3, got " + std::to_string(dim));
    if (points_per_axis < 8 || (points_per_axis & (points_per_axis - 1)) != 0)
      throw std::invalid_argument("Grid: points per axis must be a power of two >= 8, got " +
                                  std::to_string(points_per_axis));
    if (!(box_length > 0.0) || !std::isfinite(box_length))
      throw std::invalid_argument("Grid: box length must be positive and finite");
  }

  int dim() const { return dim_; }
  int n() const { return n_; }
  double length() const { return length_; }
  double spacing() const { return length_ / n_; }

  std::size_t size() const {
    std::size_t s = 1;
    for (int d = 0; d < dim_; ++d) s *= static_cast<std::size_t>(n_);
    return s;
  }

  /// Physical wavenumber of one lattice step, 2*pi/L.
  double xi_unit() const { return 2.0 * std::numbers::pi / length_; }

  /// Signed lattice index of storage position i along an axis. The unpaired
  /// Nyquist position n/2 maps to -n/2.
  int wavenumber(int i) const { return i < n_ / 2 ? i : i - n_; }
  bool is_nyquist(int i) const { return i == n_ / 2; }

  /// Largest |k| per axis retained by the 2/3 truncation.
  int dealias_max() const { return (n_ + 2) / 3 - 1; }

  Index unravel(std::size_t idx) const {
    Index out{0, 0, 0};
    for (int d = dim_ - 1; d >= 0; --d) {
      out[d] = static_cast<int>(idx % static_cast<std::size_t>(n_));
      idx /= static_cast<std::size_t>(n_);
    }
    return out;
  }

  std::size_t ravel(const Index& ix) const {
    std::size_t idx = 0;
    for (int d = 0; d < dim_; ++d) idx = idx * static_cast<std::size_t>(n_) + static_cast<std::size_t>(ix[d]);
    return idx;
  }

  Point position(std::size_t idx) const {
    Index ix = unravel(idx);
    Point p{0.0, 0.0, 0.0};
    for (int d = 0; d < dim_; ++d) p[d] = ix[d] * spacing();
    return p;
  }

  /// Physical wavenumber vector xi of spectral storage slot idx.
  Point xi(std::size_t idx) const {
    Index ix = unravel(idx);
    Point k{0.0, 0.0, 0.0};
    for (int d = 0; d < dim_; ++d) k[d] = wavenumber(ix[d]) * xi_unit();
    return k;
  }

  double xi_norm2(std::size_t idx) const {
    Point k = xi(idx);
    return k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
  }

  bool operator==(const Grid& o) const {
    return dim_ == o.dim_ && n_ == o.n_ && length_ == o.length_;
  }

private:
  int dim_;
  int n_;
  double length_;
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* where) {
  if (!(a == b)) throw std::invalid_argument(std::string(where) + ": mismatched grids");
}

/// Periodic minimum-image difference a - b along one axis of length L.
inline double periodic_delta(double a, double b, double L) {
  double d = std::fmod(a - b, L);
  if (d > 0.5 * L) d -= L;
  if (d < -0.5 * L) d += L;
  return d;
}

inline double periodic_distance(const Grid& g, const Point& a, const Point& b) {
  double s = 0.0;
  for (int d = 0; d < g.dim(); ++d) {
    double dd = periodic_delta(a[d], b[d], g.length());
    s += dd * dd;
  }
  return std::sqrt(s);
}

} // namespace eulab
