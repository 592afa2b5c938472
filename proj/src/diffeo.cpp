#include "stt/diffeo.hpp"

#include <cmath>
#include <random>

namespace stt {

void Diffeo::hessian(const Vec& y, std::array<Mat, 3>& H) const {
  // Centered differences of the analytic Jacobian.
  const int n = dim();
  const double d = 1e-6;
  for (int c = 0; c < n; ++c) H[c] = Mat::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    Vec yp = y, ym = y;
    yp[a] += d;
    ym[a] -= d;
    const Mat Jp = jacobian(yp), Jm = jacobian(ym);
    const Mat D = (Jp - Jm) / (2.0 * d);  // D(c,b) = d_a d_b psi^c
    for (int c = 0; c < n; ++c)
      for (int b = 0; b < n; ++b) {
        H[c](a, b) = 0.5 * (H[c](a, b) + D(c, b));
        H[c](b, a) = H[c](a, b);
      }
  }
}

Vec Diffeo::inverse(const Vec& x, double tol, int max_iter) const {
  Vec y = x;
  for (int it = 0; it < max_iter; ++it) {
    const Vec r = value(y) - x;
    if (r.norm() <= tol) return y;
    y -= jacobian(y).partialPivLu().solve(r);
  }
  fail(Err::no_convergence, "diffeomorphism inversion did not converge");
}

Vec BumpDiffeo::value(const Vec& y) const {
  Vec out = y;
  for (const auto& a : atoms_) {
    const Vec u = (y - a.shape.center) / a.shape.width;
    out += (a.shape.amplitude * bump_profile(u.squaredNorm())) * a.direction;
  }
  return out;
}

Mat BumpDiffeo::jacobian(const Vec& y) const {
  Mat J = Mat::Identity(n_, n_);
  ScalarJet sj;
  for (const auto& a : atoms_) {
    sj.value = 0.0;
    sj.grad = Vec::Zero(n_);
    bump_atom_jet_add(a.shape, y, 1, sj);
    J += a.direction * sj.grad.transpose();  // d_b psi^c = dir_c * d_b f
  }
  return J;
}

void BumpDiffeo::hessian(const Vec& y, std::array<Mat, 3>& H) const {
  for (int c = 0; c < n_; ++c) H[c] = Mat::Zero(n_, n_);
  ScalarJet sj;
  for (const auto& a : atoms_) {
    sj.value = 0.0;
    sj.grad = Vec::Zero(n_);
    sj.hess = Mat::Zero(n_, n_);
    bump_atom_jet_add(a.shape, y, 2, sj);
    for (int c = 0; c < n_; ++c) H[c] += a.direction[c] * sj.hess;
  }
}

Mat ComposedDiffeo::jacobian(const Vec& y) const {
  return outer_->jacobian(inner_->value(y)) * inner_->jacobian(y);
}

void ComposedDiffeo::hessian(const Vec& y, std::array<Mat, 3>& H) const {
  // d_a d_b (outer o inner)^c = sum_e Houter[c](d,e) Ji(d,a) Ji(e,b)
  //                           + sum_d Jouter(c,d) Hinner[d](a,b)
  const int n = dim();
  const Vec z = inner_->value(y);
  const Mat Ji = inner_->jacobian(y);
  const Mat Jo = outer_->jacobian(z);
  std::array<Mat, 3> Hi, Ho;
  inner_->hessian(y, Hi);
  outer_->hessian(z, Ho);
  for (int c = 0; c < n; ++c) {
    H[c] = Ji.transpose() * Ho[c] * Ji;
    for (int d = 0; d < n; ++d) H[c] += Jo(c, d) * Hi[d];
  }
}

BumpDiffeo make_bump_diffeo(const SpatialDomain& dom, double amplitude, std::uint64_t seed,
                            int atoms) {
  const int n = dom.n;
  BumpDiffeo psi(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> width_dist(0.5, 0.7);
  for (int k = 0; k < atoms; ++k) {
    BumpDiffeo::Atom a;
    a.shape.width = width_dist(rng) * dom.r_omega;
    a.shape.center = Vec::Zero(n);
    const double cmax = dom.r_omega * 0.95 - a.shape.width;
    for (int i = 0; i < n; ++i) a.shape.center[i] = unit(rng) * cmax / std::sqrt(double(n));
    a.shape.amplitude = amplitude * dom.r_omega * (0.5 + 0.5 * std::abs(unit(rng)));
    a.direction = Vec::Zero(n);
    for (int i = 0; i < n; ++i) a.direction[i] = unit(rng);
    a.direction.normalize();
    psi.add(a);
  }
  return psi;
}

PullbackMetric::PullbackMetric(const StationaryMetric& base, const Diffeo& psi,
                               double boundary_tol, double fd_step)
    : base_(&base), psi_(&psi), fd_step_(fd_step) {
  // psi must fix the boundary sphere (the support invariant breaks otherwise).
  const SpatialDomain& dom = base.domain();
  const int n = dom.n;
  const int samples = 64;
  for (int k = 0; k < samples; ++k) {
    Vec x = Vec::Zero(n);
    const double a = 2.0 * M_PI * k / samples;
    x[0] = dom.r_omega * std::cos(a);
    x[1] = dom.r_omega * std::sin(a);
    if (n == 3) {
      const double b = M_PI * ((k % 7) + 0.5) / 7.0;
      x[0] = dom.r_omega * std::sin(b) * std::cos(a);
      x[1] = dom.r_omega * std::sin(b) * std::sin(a);
      x[2] = dom.r_omega * std::cos(b);
    }
    if ((psi.value(x) - x).norm() > boundary_tol)
      fail(Err::not_boundary_fixing, "psi moves a boundary point");
  }
}

void PullbackMetric::analytic_jet(const Vec& x, MetricJet& out) const {
  const int n = dim();
  const Vec z = psi_->value(x);
  const Mat J = psi_->jacobian(x);  // J(c,b) = d_b psi^c
  std::array<Mat, 3> H;
  psi_->hessian(x, H);  // H[c](a,b) = d_a d_b psi^c

  MetricJet b;
  base_->component_jet(z, 1, b);
  out.resize(n, 1);

  // lambda~(x) = lambda(psi(x))
  out.lam = b.lam;
  out.dlam = J.transpose() * b.dlam;

  // omega~_j = J(c,j) omega_c(psi)
  out.omega = J.transpose() * b.omega;
  // d_i omega~_j = H[c](i,j) omega_c + J(c,j) d_e omega_c J(e,i)
  const Mat dom_pulled = J.transpose() * b.domega * J;  // (i,j): d_i' omega_j'
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double v = dom_pulled(i, j);
      for (int c = 0; c < n; ++c) v += H[c](i, j) * b.omega[c];
      out.domega(i, j) = v;
    }

  // h~ = J^T h(psi) J
  out.h = J.transpose() * b.h * J;
  // d_i h~_jk = H[c](i,j) h_cd J(d,k) + J(c,j) h_cd H[d](i,k) + J(c,j) J(d,k) d_e h_cd J(e,i)
  for (int i = 0; i < n; ++i) {
    Mat dh = Mat::Zero(n, n);
    Mat dh_base = Mat::Zero(n, n);  // directional derivative of h along psi_* e_i
    for (int e = 0; e < n; ++e) dh_base += J(e, i) * b.dh[e];
    dh = J.transpose() * dh_base * J;
    Mat Hi(n, n);  // Hi(c,j) = H[c](i,j)
    for (int c = 0; c < n; ++c)
      for (int j = 0; j < n; ++j) Hi(c, j) = H[c](i, j);
    dh += Hi.transpose() * b.h * J + J.transpose() * b.h * Hi;
    out.dh[i] = dh;
  }
}

void PullbackMetric::component_jet(const Vec& x, int order, MetricJet& out) const {
  if (order <= 1) {
    analytic_jet(x, out);
    out.order = order;
    return;
  }
  const int n = dim();
  analytic_jet(x, out);
  out.order = 2;
  out.d2lam = Mat::Zero(n, n);
  for (int p = 0; p < sym_count(n); ++p) {
    out.d2omega[p] = Vec::Zero(n);
    out.d2h[p] = Mat::Zero(n, n);
  }
  // Second derivatives: centered differences of the analytic first derivatives.
  MetricJet jp, jm;
  for (int a = 0; a < n; ++a) {
    Vec xp = x, xm = x;
    xp[a] += fd_step_;
    xm[a] -= fd_step_;
    analytic_jet(xp, jp);
    analytic_jet(xm, jm);
    const double inv2d = 1.0 / (2.0 * fd_step_);
    for (int b = a; b < n; ++b) {
      const int p = sym_index(a, b, n);
      // average the two estimates d_a(d_b .) and d_b(d_a .) as they arrive
      out.d2lam(a, b) += 0.5 * (jp.dlam[b] - jm.dlam[b]) * inv2d;
      out.d2omega[p] += 0.5 * inv2d * (jp.domega.row(b) - jm.domega.row(b)).transpose();
      out.d2h[p] += 0.5 * inv2d * (jp.dh[b] - jm.dh[b]);
    }
    for (int b = 0; b <= a; ++b) {
      const int p = sym_index(b, a, n);
      out.d2lam(b, a) += 0.5 * (jp.dlam[b] - jm.dlam[b]) * inv2d;
      out.d2omega[p] += 0.5 * inv2d * (jp.domega.row(b) - jm.domega.row(b)).transpose();
      out.d2h[p] += 0.5 * inv2d * (jp.dh[b] - jm.dh[b]);
    }
  }
  // mirror the symmetric scalar matrix
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < a; ++b) out.d2lam(a, b) = out.d2lam(b, a);
}

}  // namespace stt
