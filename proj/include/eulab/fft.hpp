#pragma once

#include <fftw3.h>

#include <map>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include "eulab/grid.hpp"

namespace eulab {

using Spectrum = std::vector<Complex>;

namespace detail {

// FFTW planning is not thread safe; execution of an existing plan on new
// arrays is. Plans are created once per (dim, n, direction) and never freed.
class PlanCache {
public:
  static fftw_plan get(int dim, int n, int sign) {
    static PlanCache cache;
    std::lock_guard<std::mutex> lock(cache.mutex_);
    auto key = std::make_tuple(dim, n, sign);
    auto it = cache.plans_.find(key);
    if (it != cache.plans_.end()) return it->second;
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(n);
    std::vector<Complex> in(total), out(total);
    int dims[3] = {n, n, n};
    fftw_plan p = fftw_plan_dft(dim, dims, reinterpret_cast<fftw_complex*>(in.data()),
                                reinterpret_cast<fftw_complex*>(out.data()), sign,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache.plans_.emplace(key, p);
    return p;
  }

private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

} // namespace detail

/// Forward transform with coefficients normalized as (1/N^d) sum f e^{-i xi.x},
/// the discrete counterpart of (1/L^n) times the integral.
inline Spectrum forward_fft(const Grid& g, std::span<const double> samples) {
  Spectrum in(samples.begin(), samples.end());
  Spectrum out(in.size());
  fftw_execute_dft(detail::PlanCache::get(g.dim(), g.n(), FFTW_FORWARD),
                   reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  const double scale = 1.0 / static_cast<double>(out.size());
  for (auto& c : out) c *= scale;
  return out;
}

/// Inverse of forward_fft; returns the real part of the synthesized samples.
inline std::vector<double> inverse_fft(const Grid& g, const Spectrum& coeffs) {
  Spectrum in(coeffs);
  Spectrum out(in.size());
  fftw_execute_dft(detail::PlanCache::get(g.dim(), g.n(), FFTW_BACKWARD),
                   reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  std::vector<double> r(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) r[i] = out[i].real();
  return r;
}

/// Complex inverse transform, used by interpolation prefilters.
inline Spectrum inverse_fft_complex(int dim, int n, Spectrum coeffs) {
  Spectrum out(coeffs.size());
  fftw_execute_dft(detail::PlanCache::get(dim, n, FFTW_BACKWARD),
                   reinterpret_cast<fftw_complex*>(coeffs.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

} // namespace eulab
