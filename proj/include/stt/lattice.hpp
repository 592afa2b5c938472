#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "stt/types.hpp"

namespace stt {

// Uniform cubic lattice over [lo, hi]^n with N points per axis (closed at lo,
// open-ish at hi: node k at lo + k*(hi-lo)/N, matching the DFT convention).
struct UniformGrid {
  int n = 2;
  int N = 64;
  double lo = -1.0;
  double hi = 1.0;

  double spacing() const { return (hi - lo) / N; }
  std::size_t size() const {
    std::size_t s = 1;
    for (int i = 0; i < n; ++i) s *= static_cast<std::size_t>(N);
    return s;
  }
  Vec point(std::size_t flat) const;
  std::size_t flat(const int* idx) const;
  // Centered frequency lattice: component k in {-N/2, ..., N/2-1} * (2 pi / (N dx)).
  Vec freq(std::size_t flat) const;
  double freq_step() const { return 2.0 * M_PI / (N * spacing()); }
};

// Scalar field sampled on a UniformGrid, constant `outside` beyond the box.
// Interpolation uses tensor-product quintic Lagrange stencils with analytic
// derivatives of the interpolant (value, gradient, hessian).
class ScalarLattice {
 public:
  ScalarLattice() = default;
  ScalarLattice(UniformGrid grid, double outside);

  void fill(const std::function<double(const Vec&)>& f);
  double& at(std::size_t flat) { return values_[flat]; }
  double at(std::size_t flat) const { return values_[flat]; }
  const UniformGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double outside() const { return outside_; }

  double value(const Vec& x) const;
  void jet(const Vec& x, int order, double& value, Vec& grad, Mat& hess) const;

 private:
  UniformGrid grid_;
  double outside_ = 0.0;
  std::vector<double> values_;
};

using cplx = std::complex<double>;

// Plain separable DFT approximating fhat(theta) = int e^{-i theta.x} f(x) dx
// by the Riemann sum dx^n * sum_x e^{-i theta.x} f(x), evaluated on the full
// centered frequency lattice of the grid.
std::vector<cplx> dft_plain(const UniformGrid& grid, const std::vector<double>& field,
                            int workers = 0);
std::vector<cplx> dft_plain_complex(const UniformGrid& grid, const std::vector<cplx>& field,
                                    int workers = 0);

// Serial reference implementations (direct O(size^2) sums on small grids are
// avoided; these share the separable algorithm but run single threaded).
std::vector<cplx> dft_plain_serial(const UniformGrid& grid, const std::vector<double>& field);

// l2 norm with the Riemann-sum measure: sqrt(dx^n * sum |f|^2), pairwise order.
double l2_norm(const UniformGrid& grid, const std::vector<double>& field);
// Parseval-normalized spectral l2 norm: sqrt((2pi)^-n dtheta^n sum |fhat|^2).
double spectral_l2_norm(const UniformGrid& grid, const std::vector<cplx>& fhat);

}  // namespace stt
