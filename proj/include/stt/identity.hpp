#pragma once

#include <vector>

#include "stt/flow.hpp"
#include "stt/metric.hpp"

namespace stt {

struct IdentityOptions {
  int f_samples = 513;  // F-curve nodes (odd, Simpson)
  FlowOptions flow;
  double scattering_tol = 1e-5;
  bool require_equal_scattering = true;
};

// Per-ray record of the integral-identity quantities.
struct IdentityRecord {
  PhaseState X0;
  double ell = 0.0;
  std::vector<double> s;
  std::vector<FlowVec> F;        // F(s) = X_{g2}(ell - s, X_{g1}(s, X0))
  double f_endpoint_gap = 0.0;   // |F(ell) - F(0)|_inf
  double max_interior_dev = 0.0; // max_s |F(s) - F(0)|_inf
  double residual_fd = 0.0;      // |simpson(F'_fd) - (F(ell) - F(0))|_inf
  double residual_closed = 0.0;  // same with the closed-form F'
  double max_route_diff = 0.0;   // max over interior nodes |F'_fd - F'_closed|_inf
  double max_B_norm = 0.0;       // max_s ||B(s)||_inf
  Vec transform;                 // Eq-(identity3) quadrature, (1+n) components
};

struct BBlocks {
  Mat B11, B12, B21, B22;  // (1+n) x (1+n) each
};

// The four blocks of B(s) = dX_{g2}/dX0(ell - s, X_{g1}(s, X0)) minus the
// Minkowski transport block [[I, (ell-s) delta], [0, I]].
BBlocks B_blocks(const StationaryMetric& g1, const StationaryMetric& g2, const PhaseState& X0,
                 double s, double ell, const FlowOptions& opts = {});

// (V_{g1} - V_{g2})(X) = (m zeta, -1/2 grad_x m zeta . zeta) with
// m = g1^-1 - g2^-1 taken from the raw inverses at the spatial point of X.
FlowVec hamiltonian_field_difference(const StationaryMetric& g1, const StationaryMetric& g2,
                                     const PhaseState& X);

// Computes F(s) on a uniform grid over [0, ell], plus both F' routes, the
// quadrature residuals, B norms and the identity-(identity3) transform vector.
IdentityRecord identity_record(const StationaryMetric& g1, const StationaryMetric& g2,
                               const PhaseState& X0, const IdentityOptions& opts = {});

// The (identity3) integrand at one phase point:
//   grad_x m zeta.zeta - 2 B21 m zeta + B22 grad_x m zeta.zeta,
// a (1+n)-vector; null B pointers drop the corresponding terms.
Vec identity3_integrand(const StationaryMetric& g1, const StationaryMetric& g2,
                        const PhaseState& X, const Mat* B21, const Mat* B22);

// Just the Eq-(identity3) quadrature along the g1-ray (the weighted ray
// transform of the pair at this ray).
Vec weighted_ray_transform(const StationaryMetric& g1, const StationaryMetric& g2,
                           const PhaseState& X0, const IdentityOptions& opts = {});

}  // namespace stt
