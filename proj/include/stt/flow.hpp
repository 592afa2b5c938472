#pragma once

#include <optional>
#include <vector>

#include "stt/metric.hpp"
#include "stt/types.hpp"

namespace stt {

// H_g(z, zeta) = 1/2 <g^-1(x) zeta, zeta>
double hamiltonian(const StationaryMetric& g, const PhaseState& state);

struct TrajectorySample {
  double s;
  PhaseState X;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;  // filled when recording is on
  double ell = 0.0;                       // exit parameter (until_exit mode)
  PhaseState exit_state;
  bool exited = false;
  double hamiltonian_drift = 0.0;  // max |H(s) - H(0)| over the run
};

enum class FlowMode { until_exit, until_param };

struct FlowOptions {
  double step = 0.0;           // 0 picks the default 1e-3 * rho
  double param_budget = 0.0;   // 0 picks 40 * rho; exceeding it raises NoExit
  bool record = false;
  int record_stride = 1;
  double exit_bisect_tol = 1e-12;
  double grazing_cos_tol = 1e-5;  // |xhat . xdot_hat| below this at exit => GrazingRay
};

// Integrates the bicharacteristic system
//   dz/ds = g^-1 zeta,   dzeta_j/ds = -1/2 <d_j(g^-1) zeta, zeta>
// with the classical 4th-order one-step method. In until_exit mode the first
// crossing of |x| = r_omega from inside is located by bisection. Straight
// segments outside B_(r_omega) are advanced in closed form (the metric is
// exactly Minkowski there).
Trajectory integrate_bicharacteristic(const StationaryMetric& g, const PhaseState& X0,
                                      FlowMode mode, double s_target = 0.0,
                                      const FlowOptions& opts = {});

// Variational state J(s) = dX(s)/dX0 of size 2(1+n) x 2(1+n).
struct VariationalResult {
  PhaseState X;
  FlowMat J;
};

// Integrates the linearization of the flow along the base trajectory up to
// parameter s; J(0) = I. Needs second derivatives of g^-1.
VariationalResult variational_flow(const StationaryMetric& g, const PhaseState& X0, double s,
                                   const FlowOptions& opts = {});

// Same, but only the columns of J selected by the initial matrix S
// (2(1+n) x m). Used by the shooting solvers.
struct VariationalColumnsResult {
  PhaseState X;
  FlowMat M;  // 2(1+n) x m
};
VariationalColumnsResult variational_columns(const StationaryMetric& g, const PhaseState& X0,
                                             double s, const FlowMat& S,
                                             const FlowOptions& opts = {});

// ----- Riemannian (spatial) flow --------------------------------------------

struct SpatialState {
  Vec x;
  Vec xi;
};

struct SpatialTrajectory {
  std::vector<double> s;
  std::vector<SpatialState> states;
  SpatialState final_state;
};

// Integrates the spatial Hamiltonian system for the h-part of g:
//   dx/ds = h^-1 xi,  dxi_j/ds = -1/2 <d_j(h^-1) xi, xi>.
SpatialTrajectory integrate_riemannian(const StationaryMetric& g, const SpatialState& X0,
                                       double s_end, const FlowOptions& opts = {},
                                       bool record = false);

// Spatial flow with selected variational columns (2n x m).
struct SpatialVariationalResult {
  SpatialState X;
  FlowMat M;
};
SpatialVariationalResult spatial_variational_columns(const StationaryMetric& g,
                                                     const SpatialState& X0, double s_end,
                                                     const FlowMat& S,
                                                     const FlowOptions& opts = {});

// Integrates one hyperplane-normal column for the straightening chart: starts
// at x0 on H with xi = (1, 0, ..., 0) and reports (x, xi, dx/dx0', dxi/dx0')
// at the requested parameters (sorted ascending). The variational part is with
// respect to the (n-1) in-plane coordinates of x0.
struct ChartColumnSample {
  SpatialState state;
  Mat dx_dy;   // n x (n-1), d x / d x0'
  Mat dxi_dy;  // n x (n-1)
};
std::vector<ChartColumnSample> integrate_chart_column(const StationaryMetric& g,
                                                      const Vec& x0_prime,
                                                      const std::vector<double>& params,
                                                      const FlowOptions& opts = {});

// Base states of the flow at the given ascending parameter values.
std::vector<PhaseState> flow_states_at_params(const StationaryMetric& g, const PhaseState& X0,
                                              const std::vector<double>& params,
                                              const FlowOptions& opts = {});

double default_step(const SpatialDomain& dom);

}  // namespace stt
