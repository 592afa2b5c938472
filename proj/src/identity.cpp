#include "stt/identity.hpp"

#include <cmath>

namespace stt {

namespace {

FlowVec stack_state(const PhaseState& X) {
  const int d = static_cast<int>(X.z.size());
  FlowVec v(2 * d);
  v.segment(0, d) = X.z;
  v.segment(d, d) = X.zeta;
  return v;
}

FlowMat minkowski_transport(int n, double s) {
  const int d = 1 + n;
  FlowMat M = FlowMat::Identity(2 * d, 2 * d);
  M.block(0, d, d, d) = s * minkowski(n);
  return M;
}

double simpson_weight(int k, int K) {
  if (k == 0 || k == K - 1) return 1.0;
  return (k % 2 == 1) ? 4.0 : 2.0;
}

}  // namespace

BBlocks B_blocks(const StationaryMetric& g1, const StationaryMetric& g2, const PhaseState& X0,
                 double s, double ell, const FlowOptions& opts) {
  const int n = g1.dim();
  const int d = 1 + n;
  const auto base = flow_states_at_params(g1, X0, {s}, opts);
  const auto vr = variational_columns(g2, base[0], ell - s, FlowMat::Identity(2 * d, 2 * d), opts);
  const FlowMat B = vr.M - minkowski_transport(n, ell - s);
  BBlocks out;
  out.B11 = B.block(0, 0, d, d);
  out.B12 = B.block(0, d, d, d);
  out.B21 = B.block(d, 0, d, d);
  out.B22 = B.block(d, d, d, d);
  return out;
}

FlowVec hamiltonian_field_difference(const StationaryMetric& g1, const StationaryMetric& g2,
                                     const PhaseState& X) {
  const int n = g1.dim();
  const int d = 1 + n;
  const Vec x = X.z.segment(1, n);
  GJet i1, i2;
  g1.inverse_jet(x, 1, i1);
  g2.inverse_jet(x, 1, i2);
  const Mat m = i1.G - i2.G;
  FlowVec out = FlowVec::Zero(2 * d);
  out.segment(0, d) = m * X.zeta;
  for (int j = 0; j < n; ++j)
    out[d + 1 + j] = -0.5 * X.zeta.dot((i1.dG[j] - i2.dG[j]) * X.zeta);
  return out;
}

Vec identity3_integrand(const StationaryMetric& g1, const StationaryMetric& g2,
                        const PhaseState& X, const Mat* B21, const Mat* B22) {
  const int n = g1.dim();
  const int d = 1 + n;
  const Vec x = X.z.segment(1, n);
  GJet i1, i2;
  g1.inverse_jet(x, 1, i1);
  g2.inverse_jet(x, 1, i2);
  const Mat m = i1.G - i2.G;
  Vec grad_term = Vec::Zero(d);  // (0, dm/dx^j zeta.zeta)
  for (int j = 0; j < n; ++j)
    grad_term[1 + j] = X.zeta.dot((i1.dG[j] - i2.dG[j]) * X.zeta);
  Vec out = grad_term;
  if (B21) out -= 2.0 * (*B21) * (m * X.zeta);
  if (B22) out += (*B22) * grad_term;
  return out;
}

IdentityRecord identity_record(const StationaryMetric& g1, const StationaryMetric& g2,
                               const PhaseState& X0, const IdentityOptions& opts) {
  const int n = g1.dim();
  const int d = 1 + n;
  const int K = (opts.f_samples % 2 == 1) ? opts.f_samples : opts.f_samples + 1;

  IdentityRecord rec;
  rec.X0 = X0;

  const Trajectory tr1 = integrate_bicharacteristic(g1, X0, FlowMode::until_exit, 0.0, opts.flow);
  rec.ell = tr1.ell;
  if (opts.require_equal_scattering) {
    const Trajectory tr2 =
        integrate_bicharacteristic(g2, X0, FlowMode::until_exit, 0.0, opts.flow);
    const double gap = (stack_state(tr1.exit_state) - stack_state(tr2.exit_state))
                           .cwiseAbs()
                           .maxCoeff() +
                       std::abs(tr1.ell - tr2.ell);
    if (gap > opts.scattering_tol)
      fail(Err::scattering_mismatch, "exit data of the two flows differ; identity hypothesis fails");
  }

  rec.s.resize(K);
  for (int k = 0; k < K; ++k) rec.s[k] = rec.ell * k / (K - 1);
  const auto base = flow_states_at_params(g1, X0, rec.s, opts.flow);

  // F(s) and the closed-form F'(s) = J_{g2}(ell-s, base) (V1 - V2)(base)
  rec.F.resize(K);
  std::vector<FlowVec> fprime_closed(K);
  double maxB = 0.0;
  const FlowMat I2d = FlowMat::Identity(2 * d, 2 * d);
  Vec transform = Vec::Zero(d);
  double wsum = 0.0;
  for (int k = 0; k < K; ++k) {
    const auto vr = variational_columns(g2, base[k], rec.ell - rec.s[k], I2d, opts.flow);
    rec.F[k] = stack_state(vr.X);
    const FlowVec dV = hamiltonian_field_difference(g1, g2, base[k]);
    fprime_closed[k] = vr.M * dV;
    const FlowMat B = vr.M - minkowski_transport(n, rec.ell - rec.s[k]);
    maxB = std::max(maxB, B.cwiseAbs().maxCoeff());
    const Mat B21 = B.block(d, 0, d, d), B22 = B.block(d, d, d, d);
    const Vec integ = identity3_integrand(g1, g2, base[k], &B21, &B22);
    const double w = simpson_weight(k, K);
    transform += w * integ;
    wsum += w;
  }
  const double hstep = rec.ell / (K - 1);
  rec.transform = (hstep / 3.0) * transform;
  rec.max_B_norm = maxB;

  const FlowVec dF = rec.F[K - 1] - rec.F[0];
  rec.f_endpoint_gap = dF.cwiseAbs().maxCoeff();
  for (int k = 0; k < K; ++k)
    rec.max_interior_dev =
        std::max(rec.max_interior_dev, (rec.F[k] - rec.F[0]).cwiseAbs().maxCoeff());

  // quadrature of both F' routes
  FlowVec quad_closed = FlowVec::Zero(2 * d);
  for (int k = 0; k < K; ++k) quad_closed += simpson_weight(k, K) * fprime_closed[k];
  quad_closed *= hstep / 3.0;
  rec.residual_closed = (quad_closed - dF).cwiseAbs().maxCoeff();

  // 4th-order finite differences of F on the uniform grid (interior nodes)
  std::vector<FlowVec> fprime_fd(K, FlowVec::Zero(2 * d));
  for (int k = 2; k + 2 < K; ++k) {
    fprime_fd[k] =
        (rec.F[k - 2] - 8.0 * rec.F[k - 1] + 8.0 * rec.F[k + 1] - rec.F[k + 2]) / (12.0 * hstep);
    rec.max_route_diff =
        std::max(rec.max_route_diff, (fprime_fd[k] - fprime_closed[k]).cwiseAbs().maxCoeff());
  }
  // endpoint/one-off nodes take the closed-form values so the quadrature is complete
  fprime_fd[0] = fprime_closed[0];
  fprime_fd[1] = fprime_closed[1];
  fprime_fd[K - 2] = fprime_closed[K - 2];
  fprime_fd[K - 1] = fprime_closed[K - 1];
  FlowVec quad_fd = FlowVec::Zero(2 * d);
  for (int k = 0; k < K; ++k) quad_fd += simpson_weight(k, K) * fprime_fd[k];
  quad_fd *= hstep / 3.0;
  rec.residual_fd = (quad_fd - dF).cwiseAbs().maxCoeff();

  return rec;
}

Vec weighted_ray_transform(const StationaryMetric& g1, const StationaryMetric& g2,
                           const PhaseState& X0, const IdentityOptions& opts) {
  return identity_record(g1, g2, X0, opts).transform;
}

}  // namespace stt
