#include "stt/bump.hpp"

#include <cmath>
#include <limits>

#include "stt/error.hpp"

namespace stt {

double bump_profile(double q) {
  if (q >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - q));
}

namespace {

// phi(q) = 1 - 1/(1-q) and its derivatives; the profile is exp(phi(|u|^2)).
struct Phi {
  double p1, p2, p3;  // phi', phi'', phi'''
};

Phi phi_derivs(double q) {
  const double r = 1.0 / (1.0 - q);
  return {-r * r, -2.0 * r * r * r, -6.0 * r * r * r * r};
}

}  // namespace

void ScalarBumpField::scale(double factor) {
  for (auto& a : atoms_) a.amplitude *= factor;
}

double ScalarBumpField::value(const Vec& x) const {
  double acc = base_;
  for (const auto& a : atoms_) {
    const Vec u = (x - a.center) / a.width;
    acc += a.amplitude * bump_profile(u.squaredNorm());
  }
  return acc;
}

void bump_atom_jet_add(const BumpAtom& a, const Vec& x, int order, ScalarJet& acc) {
  const int n = static_cast<int>(x.size());
  const double w = a.width;
  const Vec u = (x - a.center) / w;
  const double q = u.squaredNorm();
  if (q >= 1.0) return;
  const double f = a.amplitude * bump_profile(q);
  acc.value += f;
  if (order < 1) return;
  const auto [p1, p2, p3] = phi_derivs(q);
  // d_i f = f * p1 * 2 u_i / w
  acc.grad += (2.0 * f * p1 / w) * u;
  if (order < 2) return;
  // d_i d_j f = f [ 4 u_i u_j (p1^2 + p2) + 2 p1 delta_ij ] / w^2
  const double c2 = p1 * p1 + p2;
  acc.hess += (f / (w * w)) * (4.0 * c2 * (u * u.transpose()) + 2.0 * p1 * Mat::Identity(n, n));
  if (order < 3) return;
  // d_i d_j d_k f = f [ 8 u_i u_j u_k (p1^3 + 3 p1 p2 + p3)
  //                    + 4 (p1^2 + p2)(delta_ij u_k + delta_ik u_j + delta_jk u_i) ] / w^3
  const double c3 = p1 * p1 * p1 + 3.0 * p1 * p2 + p3;
  const double w3 = w * w * w;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      Vec& t = acc.d3[sym_index(i, j, n)];
      for (int k = 0; k < n; ++k) {
        double v = 8.0 * c3 * u[i] * u[j] * u[k];
        if (i == j) v += 4.0 * c2 * u[k];
        if (i == k) v += 4.0 * c2 * u[j];
        if (j == k) v += 4.0 * c2 * u[i];
        t[k] += f * v / w3;
      }
    }
}

void ScalarBumpField::jet(const Vec& x, int order, ScalarJet& out) const {
  const int n = n_;
  out.value = base_;
  if (order >= 1) out.grad = Vec::Zero(n);
  if (order >= 2) out.hess = Mat::Zero(n, n);
  if (order >= 3) out.d3.assign(sym_count(n), Vec::Zero(n));
  for (const auto& a : atoms_) bump_atom_jet_add(a, x, order, out);
}

double ScalarBumpField::min_width() const {
  double w = std::numeric_limits<double>::infinity();
  for (const auto& a : atoms_) w = std::min(w, a.width);
  return w;
}

double smoothstep5(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

double smoothstep5_deriv(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return 30.0 * t * t * (t - 1.0) * (t - 1.0);
}

}  // namespace stt
