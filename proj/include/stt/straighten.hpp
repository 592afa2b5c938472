#pragma once

#include <memory>
#include <vector>

#include "stt/diffeo.hpp"
#include "stt/flow.hpp"
#include "stt/lattice.hpp"
#include "stt/metric.hpp"

namespace stt {

// The geodesic-straightening chart: psi(y) is the point reached by the
// h-geodesic that leaves the hyperplane H = {x^1 = h_offset} at (h_offset, y')
// with covector (1, 0, ..., 0), integrated for parameter y^1 - h_offset.
// psi maps straight normal lines of H to h-geodesics; for special-form h it is
// the identity.
class Straightening : public Diffeo {
 public:
  // Builds the chart over [-rho, rho]^n with cache_N nodes per axis and
  // verifies det Dpsi > 0 at every node (FoldDetected otherwise).
  Straightening(const StationaryMetric& g, int cache_N, FlowOptions flow = {}, int workers = 0);

  int dim() const override { return g_->dim(); }
  // Exact evaluation by re-integrating the chart column.
  Vec value(const Vec& y) const override;
  Mat jacobian(const Vec& y) const override;
  // Cheap evaluation from the cached lattice (quintic interpolation).
  Vec value_cached(const Vec& y) const;
  Mat jacobian_cached(const Vec& y) const;

  const UniformGrid& grid() const { return grid_; }
  double max_displacement() const { return max_disp_; }  // ||psi - Id||_inf over nodes
  double min_jacobian_det() const { return min_det_; }

 private:
  struct ChartPoint {
    Vec x;
    Mat J;
  };
  ChartPoint chart_point(const Vec& y) const;

  const StationaryMetric* g_;
  UniformGrid grid_;
  FlowOptions flow_;
  std::vector<ScalarLattice> psi_cache_;  // n components of psi
  std::vector<ScalarLattice> jac_cache_;  // n*n entries of Dpsi (row-major)
  double max_disp_ = 0.0;
  double min_det_ = 1.0;
};

// Stationary metric backed by sampled component lattices (used for metrics in
// straightened coordinates). Outside the lattice box the metric is Minkowski.
class SampledMetric : public StationaryMetric {
 public:
  SampledMetric(SpatialDomain dom, UniformGrid grid);

  int dim() const override { return dom_.n; }
  const SpatialDomain& domain() const override { return dom_; }
  void component_jet(const Vec& x, int order, MetricJet& out) const override;

  ScalarLattice& lam() { return lam_; }
  ScalarLattice& omega(int j) { return omega_[j]; }
  ScalarLattice& h(int i, int j) { return h_[sym_index(i, j, dom_.n)]; }
  const ScalarLattice& lam() const { return lam_; }

 private:
  SpatialDomain dom_;
  UniformGrid grid_;
  ScalarLattice lam_;
  std::vector<ScalarLattice> omega_;
  std::vector<ScalarLattice> h_;
};

struct PullbackReport {
  double special_form_residual = 0.0;  // max |h~_11 - 1|, |h~_1j|, |omega~_1|
  double max_displacement = 0.0;
};

// Full pullback (Id x psi)^* g evaluated exactly on the lattice nodes by chart
// re-integration: lambda(psi), (Dpsi)^T omega(psi), (Dpsi)^T h(psi) Dpsi.
SampledMetric pullback_full(const StationaryMetric& g, const Straightening& psi,
                            const UniformGrid& grid, int workers = 0,
                            PullbackReport* report = nullptr);

// The tensor difference m = g1^-1 - g2^-1 on a lattice, stored per component
// in the special block form (time row m_lam, mixed row m_omega, spatial block
// m_h; the x^1 row and column vanish). Entries the block pattern forces to
// zero are dropped; the largest dropped magnitude is recorded and checked
// against the supplied special-form residual bound.
struct TensorDifference {
  UniformGrid grid;
  int n = 0;
  ScalarLattice m_lam;
  std::vector<ScalarLattice> m_omega;  // size n, component 0 identically zero
  std::vector<ScalarLattice> m_h;     // packed symmetric, first row/col zero
  double zeroed_mass = 0.0;
  double max_abs = 0.0;  // max over kept entries and nodes

  // Assembled (1+n)x(1+n) matrix at y (interpolated).
  Mat value(const Vec& y) const;
  // Value plus spatial gradient dm[i] = d_i m.
  void jet(const Vec& y, Mat& m, std::array<Mat, 3>& dm) const;
};

TensorDifference tensor_difference(const StationaryMetric& g1, const StationaryMetric& g2,
                                   const UniformGrid& grid, double form_residual_bound,
                                   int workers = 0);

}  // namespace stt
