#include "stt/flow.hpp"

#include <algorithm>
#include <cmath>

namespace stt {

namespace {

struct InvJetCache {
  GJet inv;  // inverse metric jet at the current spatial point
};

// Right-hand side of dz/ds = G^-1 zeta, dzeta_j/ds = -1/2 <d_j G^-1 zeta, zeta>.
void rhs(const StationaryMetric& g, double r_omega2, const Vec& z, const Vec& zeta, Vec& dz,
         Vec& dzeta, GJet& scratch) {
  const int n = g.dim();
  const Vec x = z.segment(1, n);
  if (x.squaredNorm() >= r_omega2) {
    // exactly Minkowski outside Omega
    dz = mink_flip(zeta);
    dzeta = Vec::Zero(1 + n);
    return;
  }
  g.inverse_jet(x, 1, scratch);
  dz = scratch.G * zeta;
  dzeta = Vec::Zero(1 + n);
  for (int j = 0; j < n; ++j) dzeta[1 + j] = -0.5 * zeta.dot(scratch.dG[j] * zeta);
}

struct StepperState {
  Vec z, zeta;
};

void rk4_step(const StationaryMetric& g, double r_omega2, StepperState& X, double h) {
  GJet scratch;
  Vec k1z, k1c, k2z, k2c, k3z, k3c, k4z, k4c;
  rhs(g, r_omega2, X.z, X.zeta, k1z, k1c, scratch);
  rhs(g, r_omega2, X.z + 0.5 * h * k1z, X.zeta + 0.5 * h * k1c, k2z, k2c, scratch);
  rhs(g, r_omega2, X.z + 0.5 * h * k2z, X.zeta + 0.5 * h * k2c, k3z, k3c, scratch);
  rhs(g, r_omega2, X.z + h * k3z, X.zeta + h * k3c, k4z, k4c, scratch);
  X.z += (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
  X.zeta += (h / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
}

double sphere_gap(const StepperState& X, int n, double r_omega2) {
  return X.z.segment(1, n).squaredNorm() - r_omega2;
}

}  // namespace

double default_step(const SpatialDomain& dom) { return 1e-3 * dom.rho; }

double hamiltonian(const StationaryMetric& g, const PhaseState& state) {
  const int n = g.dim();
  const Vec x = state.z.segment(1, n);
  return 0.5 * state.zeta.dot(g.inverse_at(x) * state.zeta);
}

Trajectory integrate_bicharacteristic(const StationaryMetric& g, const PhaseState& X0,
                                      FlowMode mode, double s_target, const FlowOptions& opts) {
  const SpatialDomain& dom = g.domain();
  const int n = dom.n;
  const double h = opts.step > 0 ? opts.step : default_step(dom);
  const double budget = opts.param_budget > 0 ? opts.param_budget : 40.0 * dom.rho;
  const double r2 = dom.r_omega * dom.r_omega;

  Trajectory out;
  StepperState X{X0.z, X0.zeta};
  double s = 0.0;

  const double H0 = hamiltonian(g, X0);
  double drift = 0.0;
  auto track = [&](double sv, const StepperState& st) {
    if (opts.record && (out.samples.empty() || out.samples.back().s < sv - 1e-15))
      out.samples.push_back({sv, PhaseState{st.z, st.zeta}});
    drift = std::max(drift, std::abs(hamiltonian(g, PhaseState{st.z, st.zeta}) - H0));
  };
  track(0.0, X);

  if (mode == FlowMode::until_exit) {
    // If starting outside the ball, advance in closed form to the sphere
    // (the flow is exactly Minkowski there).
    double gap = sphere_gap(X, n, r2);
    if (gap > 1e-14) {
      const Vec v = mink_flip(X.zeta).segment(1, n);
      const Vec x = X.z.segment(1, n);
      const double a = v.squaredNorm(), b = 2.0 * x.dot(v), c = gap;
      const double disc = b * b - 4.0 * a * c;
      if (a <= 0.0 || disc <= 0.0 || -b - std::sqrt(disc) <= 0.0)
        fail(Err::no_exit, "ray starting outside Omega never reaches it");
      const double t_in = (-b - std::sqrt(disc)) / (2.0 * a);
      X.z += t_in * mink_flip(X.zeta);
      s += t_in;
      track(s, X);
    }
  }

  int step_count = 0;
  while (true) {
    if (mode == FlowMode::until_param) {
      if (s >= s_target - 1e-15) break;
      const double hs = std::min(h, s_target - s);
      rk4_step(g, r2, X, hs);
      s += hs;
      ++step_count;
      if (opts.record && step_count % opts.record_stride == 0) track(s, X);
      if (step_count % 16 == 0)
        drift = std::max(drift, std::abs(hamiltonian(g, PhaseState{X.z, X.zeta}) - H0));
      continue;
    }
    // until_exit
    StepperState Xp = X;
    rk4_step(g, r2, Xp, h);
    const double gap_new = sphere_gap(Xp, n, r2);
    const double gap_old = sphere_gap(X, n, r2);
    if (gap_old < 0.0 && gap_new >= 0.0) {
      // bracketed exit: bisect the partial step length
      double lo = 0.0, hi = h;
      StepperState Xc;
      while (hi - lo > opts.exit_bisect_tol) {
        const double mid = 0.5 * (lo + hi);
        Xc = X;
        rk4_step(g, r2, Xc, mid);
        (sphere_gap(Xc, n, r2) < 0.0 ? lo : hi) = mid;
      }
      Xc = X;
      rk4_step(g, r2, Xc, hi);
      // grazing guard: the radial component of the exit velocity
      const Vec xe = Xc.z.segment(1, n);
      GJet scratch;
      Vec dz, dzeta;
      rhs(g, r2, Xc.z, Xc.zeta, dz, dzeta, scratch);
      const Vec xdot = dz.segment(1, n);
      const double cosr = std::abs(xe.normalized().dot(xdot.normalized()));
      if (cosr < opts.grazing_cos_tol) fail(Err::grazing_ray, "tangential boundary crossing");
      s += hi;
      X = Xc;
      track(s, X);
      out.ell = s;
      out.exit_state = PhaseState{X.z, X.zeta};
      out.exited = true;
      break;
    }
    X = Xp;
    s += h;
    ++step_count;
    if (opts.record && step_count % opts.record_stride == 0) track(s, X);
    if (step_count % 16 == 0)
      drift = std::max(drift, std::abs(hamiltonian(g, PhaseState{X.z, X.zeta}) - H0));
    if (s > budget) fail(Err::no_exit, "parameter budget exhausted before boundary exit");
  }

  if (mode == FlowMode::until_param) {
    out.ell = s;
    out.exit_state = PhaseState{X.z, X.zeta};
    track(s, X);
  }
  drift = std::max(drift, std::abs(hamiltonian(g, out.exit_state) - H0));
  out.hamiltonian_drift = drift;
  return out;
}

namespace {

// DV blocks for the spacetime system; M is 2(1+n) x m.
void variational_rhs(const StationaryMetric& g, double r2, const Vec& z, const Vec& zeta,
                     const FlowMat& M, Vec& dz, Vec& dzeta, FlowMat& dM, GJet& scratch) {
  const int n = g.dim();
  const int d = 1 + n;
  const Vec x = z.segment(1, n);
  const bool outside = x.squaredNorm() >= r2;
  FlowMat DV = FlowMat::Zero(2 * d, 2 * d);
  if (outside) {
    dz = mink_flip(zeta);
    dzeta = Vec::Zero(d);
    DV.block(0, d, d, d) = minkowski(n);
  } else {
    g.inverse_jet(x, 2, scratch);
    dz = scratch.G * zeta;
    dzeta = Vec::Zero(d);
    for (int j = 0; j < n; ++j) dzeta[1 + j] = -0.5 * zeta.dot(scratch.dG[j] * zeta);
    DV.block(0, d, d, d) = scratch.G;
    for (int b = 0; b < n; ++b) DV.block(0, 1 + b, d, 1) = scratch.dG[b] * zeta;
    for (int j = 0; j < n; ++j) {
      for (int b = 0; b < n; ++b)
        DV(d + 1 + j, 1 + b) = -0.5 * zeta.dot(scratch.d2G[sym_index(j, b, n)] * zeta);
      DV.block(d + 1 + j, d, 1, d) = -(scratch.dG[j] * zeta).transpose();
    }
  }
  dM = DV * M;
}

struct VarState {
  Vec z, zeta;
  FlowMat M;
};

void rk4_var_step(const StationaryMetric& g, double r2, VarState& X, double h) {
  GJet scratch;
  Vec k1z, k1c, k2z, k2c, k3z, k3c, k4z, k4c;
  FlowMat k1M, k2M, k3M, k4M;
  variational_rhs(g, r2, X.z, X.zeta, X.M, k1z, k1c, k1M, scratch);
  variational_rhs(g, r2, X.z + 0.5 * h * k1z, X.zeta + 0.5 * h * k1c, X.M + 0.5 * h * k1M, k2z,
                  k2c, k2M, scratch);
  variational_rhs(g, r2, X.z + 0.5 * h * k2z, X.zeta + 0.5 * h * k2c, X.M + 0.5 * h * k2M, k3z,
                  k3c, k3M, scratch);
  variational_rhs(g, r2, X.z + h * k3z, X.zeta + h * k3c, X.M + h * k3M, k4z, k4c, k4M, scratch);
  X.z += (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
  X.zeta += (h / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
  X.M += (h / 6.0) * (k1M + 2.0 * k2M + 2.0 * k3M + k4M);
}

}  // namespace

VariationalColumnsResult variational_columns(const StationaryMetric& g, const PhaseState& X0,
                                             double s, const FlowMat& S,
                                             const FlowOptions& opts) {
  const SpatialDomain& dom = g.domain();
  const double h = opts.step > 0 ? opts.step : default_step(dom);
  const double r2 = dom.r_omega * dom.r_omega;
  VarState X{X0.z, X0.zeta, S};
  double done = 0.0;
  const double dir = s >= 0 ? 1.0 : -1.0;
  const double total = std::abs(s);
  while (done < total - 1e-15) {
    const double hs = std::min(h, total - done);
    rk4_var_step(g, r2, X, dir * hs);
    done += hs;
  }
  return {PhaseState{X.z, X.zeta}, X.M};
}

VariationalResult variational_flow(const StationaryMetric& g, const PhaseState& X0, double s,
                                   const FlowOptions& opts) {
  const int d = 1 + g.dim();
  auto r = variational_columns(g, X0, s, FlowMat::Identity(2 * d, 2 * d), opts);
  return {r.X, r.M};
}

// ----- Riemannian (spatial) flow --------------------------------------------

namespace {

void spatial_rhs(const StationaryMetric& g, double r2, const Vec& x, const Vec& xi, Vec& dx,
                 Vec& dxi, GJet& scratch) {
  const int n = g.dim();
  if (x.squaredNorm() >= r2) {
    dx = xi;
    dxi = Vec::Zero(n);
    return;
  }
  g.h_inverse_jet(x, 1, scratch);
  dx = scratch.G * xi;
  dxi = Vec::Zero(n);
  for (int j = 0; j < n; ++j) dxi[j] = -0.5 * xi.dot(scratch.dG[j] * xi);
}

void spatial_var_rhs(const StationaryMetric& g, double r2, const Vec& x, const Vec& xi,
                     const FlowMat& M, Vec& dx, Vec& dxi, FlowMat& dM, GJet& scratch) {
  const int n = g.dim();
  FlowMat DV = FlowMat::Zero(2 * n, 2 * n);
  if (x.squaredNorm() >= r2) {
    dx = xi;
    dxi = Vec::Zero(n);
    DV.block(0, n, n, n) = Mat::Identity(n, n);
  } else {
    g.h_inverse_jet(x, 2, scratch);
    dx = scratch.G * xi;
    dxi = Vec::Zero(n);
    for (int j = 0; j < n; ++j) dxi[j] = -0.5 * xi.dot(scratch.dG[j] * xi);
    DV.block(0, n, n, n) = scratch.G;
    for (int b = 0; b < n; ++b) DV.block(0, b, n, 1) = scratch.dG[b] * xi;
    for (int j = 0; j < n; ++j) {
      for (int b = 0; b < n; ++b) DV(n + j, b) = -0.5 * xi.dot(scratch.d2G[sym_index(j, b, n)] * xi);
      DV.block(n + j, n, 1, n) = -(scratch.dG[j] * xi).transpose();
    }
  }
  dM = DV * M;
}

struct SpatialVarState {
  Vec x, xi;
  FlowMat M;
  bool with_var = false;
};

void rk4_spatial_step(const StationaryMetric& g, double r2, SpatialVarState& X, double h) {
  GJet scratch;
  if (!X.with_var) {
    Vec k1x, k1xi, k2x, k2xi, k3x, k3xi, k4x, k4xi;
    spatial_rhs(g, r2, X.x, X.xi, k1x, k1xi, scratch);
    spatial_rhs(g, r2, X.x + 0.5 * h * k1x, X.xi + 0.5 * h * k1xi, k2x, k2xi, scratch);
    spatial_rhs(g, r2, X.x + 0.5 * h * k2x, X.xi + 0.5 * h * k2xi, k3x, k3xi, scratch);
    spatial_rhs(g, r2, X.x + h * k3x, X.xi + h * k3xi, k4x, k4xi, scratch);
    X.x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    X.xi += (h / 6.0) * (k1xi + 2.0 * k2xi + 2.0 * k3xi + k4xi);
    return;
  }
  Vec k1x, k1xi, k2x, k2xi, k3x, k3xi, k4x, k4xi;
  FlowMat k1M, k2M, k3M, k4M;
  spatial_var_rhs(g, r2, X.x, X.xi, X.M, k1x, k1xi, k1M, scratch);
  spatial_var_rhs(g, r2, X.x + 0.5 * h * k1x, X.xi + 0.5 * h * k1xi, X.M + 0.5 * h * k1M, k2x,
                  k2xi, k2M, scratch);
  spatial_var_rhs(g, r2, X.x + 0.5 * h * k2x, X.xi + 0.5 * h * k2xi, X.M + 0.5 * h * k2M, k3x,
                  k3xi, k3M, scratch);
  spatial_var_rhs(g, r2, X.x + h * k3x, X.xi + h * k3xi, X.M + h * k3M, k4x, k4xi, k4M, scratch);
  X.x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  X.xi += (h / 6.0) * (k1xi + 2.0 * k2xi + 2.0 * k3xi + k4xi);
  X.M += (h / 6.0) * (k1M + 2.0 * k2M + 2.0 * k3M + k4M);
}

}  // namespace

SpatialTrajectory integrate_riemannian(const StationaryMetric& g, const SpatialState& X0,
                                       double s_end, const FlowOptions& opts, bool record) {
  const SpatialDomain& dom = g.domain();
  const double h = opts.step > 0 ? opts.step : default_step(dom);
  const double r2 = dom.r_omega * dom.r_omega;
  SpatialVarState X{X0.x, X0.xi, FlowMat(), false};
  SpatialTrajectory out;
  double s = 0.0;
  if (record) {
    out.s.push_back(0.0);
    out.states.push_back(X0);
  }
  const double dir = s_end >= 0 ? 1.0 : -1.0;
  const double total = std::abs(s_end);
  int k = 0;
  while (s < total - 1e-15) {
    const double hs = std::min(h, total - s);
    rk4_spatial_step(g, r2, X, dir * hs);
    s += hs;
    ++k;
    if (record && k % std::max(1, opts.record_stride) == 0) {
      out.s.push_back(dir * s);
      out.states.push_back({X.x, X.xi});
    }
  }
  out.final_state = {X.x, X.xi};
  return out;
}

SpatialVariationalResult spatial_variational_columns(const StationaryMetric& g,
                                                     const SpatialState& X0, double s_end,
                                                     const FlowMat& S, const FlowOptions& opts) {
  const SpatialDomain& dom = g.domain();
  const double h = opts.step > 0 ? opts.step : default_step(dom);
  const double r2 = dom.r_omega * dom.r_omega;
  SpatialVarState X{X0.x, X0.xi, S, true};
  const double dir = s_end >= 0 ? 1.0 : -1.0;
  const double total = std::abs(s_end);
  double s = 0.0;
  while (s < total - 1e-15) {
    const double hs = std::min(h, total - s);
    rk4_spatial_step(g, r2, X, dir * hs);
    s += hs;
  }
  return {{X.x, X.xi}, X.M};
}

std::vector<PhaseState> flow_states_at_params(const StationaryMetric& g, const PhaseState& X0,
                                              const std::vector<double>& params,
                                              const FlowOptions& opts) {
  std::vector<PhaseState> out;
  out.reserve(params.size());
  PhaseState X = X0;
  double s = 0.0;
  for (double target : params) {
    if (target < s - 1e-12) fail(Err::config_error, "params must be ascending");
    if (target > s + 1e-15) {
      const Trajectory tr = integrate_bicharacteristic(g, X, FlowMode::until_param, target - s, opts);
      X = tr.exit_state;
      s = target;
    }
    out.push_back(X);
  }
  return out;
}

std::vector<ChartColumnSample> integrate_chart_column(const StationaryMetric& g,
                                                      const Vec& x0_prime,
                                                      const std::vector<double>& params,
                                                      const FlowOptions& opts) {
  const SpatialDomain& dom = g.domain();
  const int n = dom.n;
  const double h = opts.step > 0 ? opts.step : default_step(dom);
  const double r2 = dom.r_omega * dom.r_omega;

  SpatialVarState X;
  X.x = Vec::Zero(n);
  X.x[0] = dom.h_offset;
  for (int i = 0; i + 1 < n; ++i) X.x[1 + i] = x0_prime[i];
  X.xi = Vec::Zero(n);
  X.xi[0] = 1.0;
  X.M = FlowMat::Zero(2 * n, n - 1);
  for (int i = 0; i + 1 < n; ++i) X.M(1 + i, i) = 1.0;  // dx/dx0'
  X.with_var = true;

  std::vector<ChartColumnSample> out;
  out.reserve(params.size());
  double s = 0.0;
  for (double target : params) {
    if (target < s - 1e-12) fail(Err::config_error, "chart params must be ascending");
    while (s < target - 1e-15) {
      const double hs = std::min(h, target - s);
      rk4_spatial_step(g, r2, X, hs);
      s += hs;
    }
    ChartColumnSample smp;
    smp.state = {X.x, X.xi};
    smp.dx_dy = X.M.block(0, 0, n, n - 1);
    smp.dxi_dy = X.M.block(n, 0, n, n - 1);
    out.push_back(std::move(smp));
  }
  return out;
}

}  // namespace stt
