#pragma once

#include <vector>

#include "stt/types.hpp"

namespace stt {

// The standard compactly supported profile exp(1 - 1/(1 - |u|^2)) on |u| < 1,
// normalized to 1 at the center, identically 0 outside.
double bump_profile(double q);  // q = |u|^2

// One translated/rescaled/scaled copy of the profile.
struct BumpAtom {
  Vec center;
  double width = 1.0;
  double amplitude = 0.0;
};

// Derivatives of a scalar field at a point, up to third order.
struct ScalarJet {
  double value = 0.0;
  Vec grad;              // grad[i] = d_i f, spatial size n
  Mat hess;              // hess(i,j) = d_i d_j f
  std::vector<Vec> d3;   // d3[sym_index(i,j,n)][k] = d_i d_j d_k f (order 3 only)
};

// A finite sum of bump atoms plus a constant base value.
class ScalarBumpField {
 public:
  ScalarBumpField() = default;
  ScalarBumpField(int n, double base) : n_(n), base_(base) {}

  void add(const BumpAtom& atom) { atoms_.push_back(atom); }
  void scale(double factor);
  bool empty() const { return atoms_.empty(); }
  int dim() const { return n_; }
  double base() const { return base_; }
  const std::vector<BumpAtom>& atoms() const { return atoms_; }

  double value(const Vec& x) const;
  // Fills jet entries up to `order` (0..3).
  void jet(const Vec& x, int order, ScalarJet& out) const;
  // Smallest atom width (infinity when empty), used by grid-resolution guards.
  double min_width() const;

 private:
  int n_ = 0;
  double base_ = 0.0;
  std::vector<BumpAtom> atoms_;
};

// Adds the jet of one atom (derivatives up to `order`) into `acc`, whose
// entries must already be sized and initialized.
void bump_atom_jet_add(const BumpAtom& atom, const Vec& x, int order, ScalarJet& acc);

// Quintic smoothstep: 0 for t<=0, 1 for t>=1, C^2 monotone in between.
double smoothstep5(double t);
double smoothstep5_deriv(double t);

}  // namespace stt
