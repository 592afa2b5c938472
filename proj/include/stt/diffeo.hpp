#pragma once

#include <array>
#include <memory>
#include <vector>

#include "stt/metric.hpp"
#include "stt/types.hpp"

namespace stt {

// A spatial diffeomorphism of R^n equal to the identity outside a compact
// region. hessian() fills H[c](a,b) = d_a d_b psi^c.
class Diffeo {
 public:
  virtual ~Diffeo() = default;
  virtual int dim() const = 0;
  virtual Vec value(const Vec& y) const = 0;
  virtual Mat jacobian(const Vec& y) const = 0;
  virtual void hessian(const Vec& y, std::array<Mat, 3>& H) const;
  // Newton inversion with initial guess y = x.
  virtual Vec inverse(const Vec& x, double tol = 1e-12, int max_iter = 50) const;
};

// psi(x) = x + sum_k amplitude_k * bump((x - c_k)/w_k) * dir_k, with analytic
// first and second derivatives. Boundary-fixing as long as the atom supports
// stay inside Omega.
class BumpDiffeo : public Diffeo {
 public:
  explicit BumpDiffeo(int n) : n_(n) {}

  struct Atom {
    BumpAtom shape;
    Vec direction;  // displacement direction, |direction| = 1
  };

  void add(const Atom& atom) { atoms_.push_back(atom); }
  const std::vector<Atom>& atoms() const { return atoms_; }

  int dim() const override { return n_; }
  Vec value(const Vec& y) const override;
  Mat jacobian(const Vec& y) const override;
  void hessian(const Vec& y, std::array<Mat, 3>& H) const override;

 private:
  int n_ = 0;
  std::vector<Atom> atoms_;
};

// Composition psi1 after psi2 with chain-rule derivatives.
class ComposedDiffeo : public Diffeo {
 public:
  ComposedDiffeo(const Diffeo& outer, const Diffeo& inner) : outer_(&outer), inner_(&inner) {}
  int dim() const override { return inner_->dim(); }
  Vec value(const Vec& y) const override { return outer_->value(inner_->value(y)); }
  Mat jacobian(const Vec& y) const override;
  void hessian(const Vec& y, std::array<Mat, 3>& H) const override;

 private:
  const Diffeo* outer_;
  const Diffeo* inner_;
};

// Seeded boundary-fixing test diffeomorphism; displacement amplitude scales
// with `amplitude`.
BumpDiffeo make_bump_diffeo(const SpatialDomain& dom, double amplitude, std::uint64_t seed,
                            int atoms = 2);

// The pullback metric psi^* g with components
//   lambda(psi), (Dpsi)^T omega(psi), (Dpsi)^T h(psi) Dpsi.
// First derivatives are analytic (uses the diffeo hessian); second derivatives
// are centered differences of the analytic first derivatives.
// Throws NotBoundaryFixing when psi moves boundary samples beyond tol.
class PullbackMetric : public StationaryMetric {
 public:
  PullbackMetric(const StationaryMetric& base, const Diffeo& psi, double boundary_tol = 1e-10,
                 double fd_step = 3e-5);

  int dim() const override { return base_->dim(); }
  const SpatialDomain& domain() const override { return base_->domain(); }
  void component_jet(const Vec& x, int order, MetricJet& out) const override;

 private:
  void analytic_jet(const Vec& x, MetricJet& out) const;  // order <= 1

  const StationaryMetric* base_;
  const Diffeo* psi_;
  double fd_step_;
};

}  // namespace stt
