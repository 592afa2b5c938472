#pragma once

#include <vector>

#include "stt/boundary.hpp"
#include "stt/fourier.hpp"
#include "stt/straighten.hpp"

namespace stt {

// The (n-1)^2 directions p in S^(n-2) and the least-squares map recovering the
// independent entries of a symmetric (n-1)x(n-1) matrix from the quadratic
// forms p -> m p.p.
struct DirectionSet {
  int n = 2;
  std::vector<Vec> p;
  Eigen::MatrixXd forms;     // rows: quadratic-form coefficients per direction
  Eigen::MatrixXd recovery;  // pseudoinverse of `forms`
  double condition_number = 1.0;
};

DirectionSet direction_set(int n);

// Recovers the packed (i<=j) entries from the per-direction values.
Eigen::VectorXd recover_quadratic(const DirectionSet& ds, const Eigen::VectorXd& values);
Eigen::VectorXcd recover_quadratic(const DirectionSet& ds, const Eigen::VectorXcd& values);

// ----- spatial flow helpers ---------------------------------------------------

struct SpatialExit {
  SpatialState state;
  double ell = 0.0;
};

// Runs the h-geodesic flow until the spatial exit from Omega; straight
// segments outside are advanced in closed form.
SpatialExit spatial_until_exit(const StationaryMetric& g, const SpatialState& X0,
                               const FlowOptions& opts = {});

std::vector<SpatialState> spatial_states_at_params(const StationaryMetric& g,
                                                   const SpatialState& X0,
                                                   const std::vector<double>& params,
                                                   const FlowOptions& opts = {});

// ----- B21 factorization ------------------------------------------------------

struct B21Report {
  double max_b21_normal = 0.0;  // rays with xi0 = e1 (expect 0 for special form)
  std::vector<double> tilt;            // tilt angles probed
  std::vector<double> max_b21_tilt;    // max ||B21||_inf per tilt
  double fit_exponent = 0.0;           // log-log slope of max||B21|| vs sin(tilt)
};

// Checks B21 == 0 along straightened normal rays and fits the decay of
// ||B21|| as the entry direction tilts away from e1.
B21Report b21_factorization_check(const StationaryMetric& h1, const StationaryMetric& h2,
                                  int rays, const std::vector<double>& tilts,
                                  const FlowOptions& opts = {}, int workers = 0);

// ----- the spatial (chi_p) transform -------------------------------------------

// Spatial analog of the A transform: traces h1-geodesics with xi0 = xi(eta, p),
// integrates grad m xi.xi - 2 B21 m xi + B22 grad m xi.xi with
// m = h1^-1 - h2^-1, Fourier-transforms over the initial hyperplane and applies
// the chi_p cutoff. Values are returned in the (1+n)-component layout of
// ASpectrum with component 0 identically zero.
ASpectrum transform_R_pair(const StationaryMetric& h1, const StationaryMetric& h2,
                           const UniformGrid& grid, const ATransformOptions& opt);

// eps = 0 route for a synthetic special-form spatial tensor.
ASpectrum transform_R_synthetic(const SyntheticTensor& m, const SpatialDomain& dom,
                                const UniformGrid& grid, const ATransformOptions& opt);

// Reduced integrand route (the common factor psi_p^2 cancelled):
// chi_p(eta) sum_y e^{-i eta y} int grad(m p.p) ds, straight rays.
ASpectrum transform_R_reduced_synthetic(const SyntheticTensor& m, const SpatialDomain& dom,
                                        const UniformGrid& grid, const ATransformOptions& opt);

// DFT oracle for the spatial transform.
ASpectrum oracle_R_spectrum(const SyntheticTensor& m, const SpatialDomain& dom,
                            const UniformGrid& grid, const ATransformOptions& opt);

// ----- the full Riemannian pipeline --------------------------------------------

struct RiemannianPipelineOptions {
  int chart_N = 96;
  int lattice_N = 64;
  double slack = 1.0;
  double floor_abs = 1e-6;
  CutoffSpec chi{CutoffSpec::Kind::riemannian, 0.05};
  int workers = 0;
  FlowOptions flow;
};

struct RiemannianPipelineReport {
  double special_form_residual1 = 0.0;
  double special_form_residual2 = 0.0;
  double m_max = 0.0;
  double grad_m_norm = 0.0;
  double ratio = 0.0;          // ||theta mhat||/(sqrt(eps)||grad m|| + floor)
  double contraction_rhs = 0.0;  // (1/2) ||grad m||
  bool pass = false;
};

// Straightens both metrics, forms the tensor difference, and evaluates the
// contraction ledger of the boundary-distance uniqueness argument.
RiemannianPipelineReport riemannian_pipeline(const StationaryMetric& h1,
                                             const StationaryMetric& h2, double eps,
                                             const RiemannianPipelineOptions& opt = {});

// Max absolute gap between the product-metric Lorentzian transform of
// g_j = -dt^2 + h_j and the spatial transform of (h1, h2) over a common
// frequency sample (the spatial projection of timelike geodesics is a
// Riemannian geodesic, so the two routes must agree).
double product_metric_corollary_gap(const StationaryMetric& h1, const StationaryMetric& h2,
                                    const UniformGrid& grid, const ATransformOptions& opt);

}  // namespace stt
