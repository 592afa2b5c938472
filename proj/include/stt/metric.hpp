#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "stt/bump.hpp"
#include "stt/error.hpp"
#include "stt/types.hpp"

namespace stt {

// The spatial domain: the open Euclidean ball Omega of radius r_omega at the
// origin, an enclosing ball B_rho, and the reference hyperplane H = {x^1 = h_offset}
// outside Omega.
struct SpatialDomain {
  int n = 2;
  double r_omega = 1.0;
  double rho = 1.3;
  double h_offset = -1.15;

  void validate() const;
  bool inside_omega(const Vec& x) const { return x.squaredNorm() < r_omega * r_omega; }
  bool inside_rho(const Vec& x) const { return x.squaredNorm() < rho * rho; }
};

// Component values and spatial derivatives of a stationary metric
//   g = -lambda dt^2 + omega (x) dt + dt (x) omega + h
// at one spatial point. Arrays are indexed by spatial axis 0..n-1 (= x^1..x^n).
struct MetricJet {
  int n = 0;
  int order = 0;
  double lam = 1.0;
  Vec omega;                  // size n
  Mat h;                      // n x n
  Vec dlam;                   // dlam[i] = d_i lambda
  Mat domega;                 // domega(i,j) = d_i omega_j
  std::array<Mat, 3> dh;      // dh[i](j,k) = d_i h_jk
  Mat d2lam;                  // d2lam(i,j)
  std::array<Vec, 6> d2omega; // d2omega[sym_index(i,j)][k] = d_i d_j omega_k
  std::array<Mat, 6> d2h;     // d2h[sym_index(i,j)](k,l) = d_i d_j h_kl

  void resize(int n_, int order_);
};

// Spacetime metric (or inverse-metric) values with spatial derivatives.
struct GJet {
  int n = 0;
  int order = 0;
  Mat G;                  // (1+n) x (1+n)
  std::array<Mat, 3> dG;  // dG[i] = d_{x^{i+1}} G
  std::array<Mat, 6> d2G; // d2G[sym_index(i,j)] = d_i d_j G
};

// A stationary Lorentzian metric equal to Minkowski outside Omega.
// Evaluation is pure and safe to call concurrently.
class StationaryMetric {
 public:
  virtual ~StationaryMetric() = default;

  virtual int dim() const = 0;
  virtual const SpatialDomain& domain() const = 0;
  // Fills component values and derivatives up to `order` (0, 1 or 2).
  virtual void component_jet(const Vec& x, int order, MetricJet& out) const = 0;

  // Assembled (1+n)x(1+n) metric and its spatial derivatives.
  void metric_jet(const Vec& x, int order, GJet& out) const;
  // Inverse metric and its spatial derivatives (via d(G^-1) = -G^-1 dG G^-1).
  void inverse_jet(const Vec& x, int order, GJet& out) const;
  // Inverse of the h block alone (n x n), same derivative layout.
  void h_inverse_jet(const Vec& x, int order, GJet& out) const;

  Mat metric_at(const Vec& x) const;
  Mat inverse_at(const Vec& x) const;
};

// Closed-form analytic family: bump-sum fields for lambda-1, omega and h-e.
// With `special_form` set the block pattern omega_1 = 0, h_1j = delta_1j holds
// by construction, so the orthogonal assumption is satisfied for any hyperplane
// {x^1 = const} outside Omega.
class BumpMetric : public StationaryMetric {
 public:
  BumpMetric(SpatialDomain dom, bool special_form);

  int dim() const override { return dom_.n; }
  const SpatialDomain& domain() const override { return dom_; }
  void component_jet(const Vec& x, int order, MetricJet& out) const override;

  bool special_form() const { return special_form_; }
  // Direct access to the component fields (lambda field has base 1, h diagonal
  // fields have base 1, everything else base 0).
  ScalarBumpField& lambda_field() { return lam_; }
  ScalarBumpField& omega_field(int j) { return omega_[j]; }
  ScalarBumpField& h_field(int i, int j) { return h_[sym_index(i, j, dom_.n)]; }
  const ScalarBumpField& lambda_field() const { return lam_; }
  const ScalarBumpField& omega_field(int j) const { return omega_[j]; }
  const ScalarBumpField& h_field(int i, int j) const { return h_[sym_index(i, j, dom_.n)]; }

  // Multiplies every atom amplitude by `factor` (the family is linear in its
  // amplitude parameter).
  BumpMetric rescaled(double factor) const;
  double min_bump_width() const;

 private:
  SpatialDomain dom_;
  bool special_form_ = false;
  ScalarBumpField lam_;
  std::vector<ScalarBumpField> omega_;
  std::vector<ScalarBumpField> h_;
};

// Parameters of the generated test families.
struct BumpFamilyParams {
  double eps = 1e-2;       // perturbation amplitude
  bool special_form = true;
  int atoms_per_field = 2;
  std::uint64_t seed = 1;
  double max_center = 0.55;  // atom centers within this fraction of r_omega
  double min_width = 0.45;   // atom widths in [min,max] fraction of r_omega; wide
  double max_width = 0.65;   // atoms keep the C^k seminorms of the family small
  bool h_only = false;  // Riemannian families: no lambda or omega perturbation
};

// Seeded generator of analytic test metrics. Atom supports stay strictly
// inside Omega, so the compact-support invariant holds exactly.
BumpMetric make_bump_metric(const SpatialDomain& dom, const BumpFamilyParams& params);

// Minkowski (the eps = 0 member of every family).
BumpMetric make_minkowski(const SpatialDomain& dom);

// Causal classification of a covector by the sign of <g^-1 zeta, zeta>.
enum class CausalClass { timelike, null, spacelike };
enum class Orientation { future, past, none };

struct CovectorClass {
  CausalClass causal;
  Orientation orientation;
};

// The null band |<g^-1 zeta, zeta>| <= null_tol * |zeta|^2 is classified null.
CovectorClass classify_covector(const StationaryMetric& g, const Vec& z, const Vec& zeta,
                                double null_tol = 1e-10);

// Uniform sampling lattice over the cube [-r, r]^n.
struct SampleGrid {
  int n = 2;
  double extent = 1.0;  // r
  int points_per_axis = 33;

  std::size_t size() const;
  Vec point(std::size_t flat) const;
  double spacing() const { return 2.0 * extent / (points_per_axis - 1); }
};

// Sampled C^k_0-style seminorm: max over the grid and over the components
// (lambda-1, omega, h-e) of all derivatives up to order k (k <= 3 analytic).
// Throws GridTooCoarse when the grid cannot resolve the narrowest bump.
double closeness_seminorm(const BumpMetric& g, int k, const SampleGrid& grid);

// max over the lattice of |h11 - 1|, |h1j| (j>=2), |omega_1|: the residual of
// the special block form.
double special_form_residual(const StationaryMetric& g, const SampleGrid& grid);

}  // namespace stt
