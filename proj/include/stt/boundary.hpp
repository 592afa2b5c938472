#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "stt/flow.hpp"
#include "stt/metric.hpp"

namespace stt {

// An event on the boundary cylinder [0,T] x boundary(Omega).
struct BoundaryEvent {
  double t = 0.0;
  Vec x;  // |x| = r_omega

  Vec event(int n) const {
    Vec z = Vec::Zero(1 + n);
    z[0] = t;
    z.segment(1, n) = x;
    return z;
  }
};

enum class SolveStatus {
  ok,
  not_causal,     // no future-pointing causal connection; tau = 0
  no_convergence,
  no_exit,
  grazing,
};

const char* to_string(SolveStatus s);

struct ShootOptions {
  double newton_tol = 1e-11;
  int max_iter = 50;
  // Use the closed-form Minkowski Jacobian instead of the variational flow;
  // converges at rate O(eps) per step and skips the variational integration.
  bool frozen_minkowski_jacobian = false;
  FlowOptions flow;
};

// Two-point solve for the time separation: Newton iteration on the initial
// covector normalized to H = -1/2 (so the flow parameter is proper time) and
// the arrival parameter. Works for y on the boundary or in the interior.
struct TauResult {
  double tau = 0.0;
  SolveStatus status = SolveStatus::ok;
  int iterations = 0;
  PhaseState initial;  // filled when status == ok
  PhaseState arrival;
};

TauResult time_separation(const StationaryMetric& g, const Vec& z, const Vec& y,
                          const ShootOptions& opts = {});

// Throwing wrapper: returns tau, maps not_causal to 0, raises NoConvergence
// otherwise.
double time_separation_value(const StationaryMetric& g, const Vec& z, const Vec& y,
                             const ShootOptions& opts = {});

// Deterministic boundary lattices: uniform angles for n = 2, a Fibonacci
// lattice for n = 3.
std::vector<Vec> boundary_points(const SpatialDomain& dom, int count);

struct TauSample {
  BoundaryEvent z, y;
  double tau = 0.0;
  SolveStatus status = SolveStatus::ok;
};

struct TauTableSpec {
  int points = 32;
  double time_factor = 1.25;  // second event at t = time_factor * |dx|
  // Keep only pairs whose chord direction is within this angle of the x^1
  // axis (the H normal); unset keeps all pairs.
  std::optional<double> cone_half_angle;
};

// Table over ordered boundary pairs with the first event at t = 0
// (stationarity makes this lossless). Entries record per-pair failures.
std::vector<TauSample> tau_table(const StationaryMetric& g, const TauTableSpec& spec,
                                 int workers = 0, const ShootOptions& opts = {});

// Scattering relation from the flow.
struct ScatteringDatum {
  PhaseState entry;
  PhaseState exit;
  double ell = 0.0;
};

ScatteringDatum scattering_relation(const StationaryMetric& g, const PhaseState& entry,
                                    const FlowOptions& opts = {});

// Entry state on the boundary cylinder: z = (0, x_b), zeta = (rho_param, xi)
// with xi the unit covector obtained by rotating the inward radial direction
// by `tilt` (radians, within the tangent plane spanned with tangent axis 0).
PhaseState make_entry_state(const SpatialDomain& dom, const Vec& x_b, double rho_param,
                            double tilt = 0.0);

// Scattering recovery from time-separation data alone (Lemma 2.2 mechanism):
// finite differences of tau give the time and tangential derivatives at the
// exit event; the boundary eikonal identity with g = delta supplies the normal
// derivative (exiting branch); the exit covector is -grad tau rescaled to the
// entry normalization.
struct RecoverOptions {
  double dt = 2e-3;          // five-point stencil steps (tau curves sharply near
  double dtheta = 2e-3;      // light-like pairs, so the stencils stay narrow)
  double nonsmooth_tol = 1e-3;   // disagreement bound between 5- and 3-point stencils
  double degenerate_tol = 1e-8;  // eikonal discriminant floor
};

using TauFn = std::function<double(const Vec& z_event, const Vec& y_event)>;

Vec recover_scattering_from_tau(const TauFn& tau, const SpatialDomain& dom, const Vec& z0,
                                const Vec& y_exit_event, double H_entry,
                                const RecoverOptions& opts = {});

// |g(grad tau, grad tau) + 1| at the interior event y, with grad tau computed
// by second-order centered differences of the shooting solution.
double eikonal_residual(const StationaryMetric& g, const Vec& z0, const Vec& y, double fd_step,
                        const ShootOptions& opts = {});

// Riemannian boundary distance by spatial shooting with |xi|_h = 1.
struct DistanceResult {
  double distance = 0.0;
  SolveStatus status = SolveStatus::ok;
  int iterations = 0;
  Vec xi0;  // initial unit covector (when ok)
};

DistanceResult riemannian_distance(const StationaryMetric& g, const Vec& x, const Vec& y,
                                   const ShootOptions& opts = {});

struct DistanceSample {
  Vec x, y;
  double distance = 0.0;
  SolveStatus status = SolveStatus::ok;
};

struct DistanceTableSpec {
  int points = 24;
  std::optional<double> cone_half_angle;  // around the x^1 axis
};

std::vector<DistanceSample> boundary_distance_table(const StationaryMetric& g,
                                                    const DistanceTableSpec& spec,
                                                    int workers = 0,
                                                    const ShootOptions& opts = {});

}  // namespace stt
