#include "stt/boundary.hpp"

#include <cmath>

#include "stt/parallel.hpp"

namespace stt {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::ok: return "ok";
    case SolveStatus::not_causal: return "not_causal";
    case SolveStatus::no_convergence: return "no_convergence";
    case SolveStatus::no_exit: return "no_exit";
    case SolveStatus::grazing: return "grazing";
  }
  return "?";
}

TauResult time_separation(const StationaryMetric& g, const Vec& z, const Vec& y,
                          const ShootOptions& opts) {
  const int n = g.dim();
  const int d = 1 + n;
  TauResult out;

  const Vec delta = y - z;
  const double dt = delta[0];
  const double dx2 = delta.segment(1, n).squaredNorm();
  const double tau2 = dt * dt - dx2;
  if (dt <= 0.0 || tau2 <= 0.0) {
    // spacelike or past-pointing for the Minkowski chord; in the
    // near-Minkowski regime there is no causal connection either
    out.status = SolveStatus::not_causal;
    return out;
  }
  const double tau0 = std::sqrt(tau2);

  // Minkowski initial guess, already normalized to H = -1/2
  Vec zeta = delta / tau0;
  zeta[0] = -dt / tau0;
  double ell = tau0;

  FlowMat S = FlowMat::Zero(2 * d, d);  // perturb zeta only
  S.block(d, 0, d, d) = FlowMat::Identity(d, d);

  const double scale = std::max(1.0, y.norm());
  for (int it = 1; it <= opts.max_iter; ++it) {
    out.iterations = it;
    PhaseState X0{z, zeta};
    PhaseState arrival;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 5, 5> J(d + 1, d + 1);
    try {
      if (opts.frozen_minkowski_jacobian) {
        const Trajectory tr =
            integrate_bicharacteristic(g, X0, FlowMode::until_param, ell, opts.flow);
        arrival = tr.exit_state;
        J.block(0, 0, d, d) = ell * minkowski(n);  // dz/dzeta0 for the flat flow
        J.block(0, d, d, 1) = mink_flip(zeta);
        J.block(d, 0, 1, d) = mink_flip(zeta).transpose();
        J(d, d) = 0.0;
      } else {
        const auto vr = variational_columns(g, X0, ell, S, opts.flow);
        arrival = vr.X;
        J.block(0, 0, d, d) = vr.M.block(0, 0, d, d);  // dz(ell)/dzeta0
        const Vec x_arr = arrival.z.segment(1, n);
        J.block(0, d, d, 1) = g.inverse_at(x_arr) * arrival.zeta;  // dz/dell
        const Vec x0 = z.segment(1, n);
        J.block(d, 0, 1, d) = (g.inverse_at(x0) * zeta).transpose();  // dH/dzeta0
        J(d, d) = 0.0;
      }
    } catch (const Error&) {
      out.status = SolveStatus::no_convergence;
      return out;
    }

    Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 5, 1> R(d + 1);
    R.segment(0, d) = arrival.z - y;
    R[d] = hamiltonian(g, X0) + 0.5;
    if (R.norm() <= opts.newton_tol * scale) {
      out.tau = ell;
      out.status = SolveStatus::ok;
      out.initial = X0;
      out.arrival = arrival;
      return out;
    }

    const Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 5, 1> du = J.partialPivLu().solve(R);
    zeta -= du.segment(0, d);
    ell -= du[d];
    if (!(ell > 0.0) || !std::isfinite(ell) || !zeta.allFinite()) {
      out.status = SolveStatus::no_convergence;
      return out;
    }
  }
  out.status = SolveStatus::no_convergence;
  return out;
}

double time_separation_value(const StationaryMetric& g, const Vec& z, const Vec& y,
                             const ShootOptions& opts) {
  const TauResult r = time_separation(g, z, y, opts);
  if (r.status == SolveStatus::ok) return r.tau;
  if (r.status == SolveStatus::not_causal) return 0.0;
  fail(Err::no_convergence, "time separation solve failed");
}

std::vector<Vec> boundary_points(const SpatialDomain& dom, int count) {
  std::vector<Vec> pts;
  pts.reserve(count);
  if (dom.n == 2) {
    for (int k = 0; k < count; ++k) {
      const double a = 2.0 * M_PI * k / count;
      Vec x(2);
      x << dom.r_omega * std::cos(a), dom.r_omega * std::sin(a);
      pts.push_back(x);
    }
  } else {
    // Fibonacci sphere lattice
    const double ga = M_PI * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
      const double zc = 1.0 - 2.0 * (k + 0.5) / count;
      const double r = std::sqrt(std::max(0.0, 1.0 - zc * zc));
      const double a = ga * k;
      Vec x(3);
      x << dom.r_omega * r * std::cos(a), dom.r_omega * r * std::sin(a), dom.r_omega * zc;
      pts.push_back(x);
    }
  }
  return pts;
}

std::vector<TauSample> tau_table(const StationaryMetric& g, const TauTableSpec& spec, int workers,
                                 const ShootOptions& opts) {
  const SpatialDomain& dom = g.domain();
  const int n = dom.n;
  const auto pts = boundary_points(dom, spec.points);

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < spec.points; ++i)
    for (int j = 0; j < spec.points; ++j) {
      if (i == j) continue;
      if (spec.cone_half_angle) {
        const Vec chord = (pts[j] - pts[i]).normalized();
        if (std::acos(std::min(1.0, std::abs(chord[0]))) > *spec.cone_half_angle) continue;
      }
      pairs.emplace_back(i, j);
    }

  std::vector<TauSample> table(pairs.size());
  par_for(pairs.size(), workers, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    TauSample& smp = table[k];
    smp.z = {0.0, pts[i]};
    const double t = spec.time_factor * (pts[j] - pts[i]).norm();
    smp.y = {t, pts[j]};
    const TauResult r = time_separation(g, smp.z.event(n), smp.y.event(n), opts);
    smp.status = r.status;
    smp.tau = r.status == SolveStatus::ok ? r.tau : 0.0;
  });
  return table;
}

ScatteringDatum scattering_relation(const StationaryMetric& g, const PhaseState& entry,
                                    const FlowOptions& opts) {
  const Trajectory tr = integrate_bicharacteristic(g, entry, FlowMode::until_exit, 0.0, opts);
  return {entry, tr.exit_state, tr.ell};
}

PhaseState make_entry_state(const SpatialDomain& dom, const Vec& x_b, double rho_param,
                            double tilt) {
  const int n = dom.n;
  Vec inward = -x_b.normalized();
  if (tilt != 0.0) {
    // rotate within the plane spanned by (inward, tangent)
    Vec tangent(n);
    if (n == 2) {
      tangent << -inward[1], inward[0];
    } else {
      Vec up = Vec::Zero(3);
      up[2] = 1.0;
      if (std::abs(inward.dot(up)) > 0.9) up << 1.0, 0.0, 0.0;
      tangent = (up - up.dot(inward) * inward).normalized();
    }
    inward = std::cos(tilt) * inward + std::sin(tilt) * tangent;
  }
  PhaseState X;
  X.z = Vec::Zero(1 + n);
  X.z.segment(1, n) = x_b;
  X.zeta = Vec::Zero(1 + n);
  X.zeta[0] = rho_param;
  X.zeta.segment(1, n) = inward;
  return X;
}

namespace {

// five-point/three-point first derivative stencils
struct StencilPair {
  double d5, d3;
};

StencilPair stencil(const std::array<double, 5>& v, double h) {
  const double d5 = (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * h);
  const double d3 = (v[3] - v[1]) / (2.0 * h);
  return {d5, d3};
}

}  // namespace

Vec recover_scattering_from_tau(const TauFn& tau, const SpatialDomain& dom, const Vec& z0,
                                const Vec& y_exit_event, double H_entry,
                                const RecoverOptions& opts) {
  const int n = dom.n;
  const double t_star = y_exit_event[0];
  const Vec y_star = y_exit_event.segment(1, n);
  const Vec nu = y_star.normalized();

  auto event = [&](double t, const Vec& x) {
    Vec e = Vec::Zero(1 + n);
    e[0] = t;
    e.segment(1, n) = x;
    return e;
  };

  // time derivative
  std::array<double, 5> tv;
  for (int k = -2; k <= 2; ++k) tv[k + 2] = tau(z0, event(t_star + k * opts.dt, y_star));
  const auto [dt5, dt3] = stencil(tv, opts.dt);
  if (std::abs(dt5 - dt3) > opts.nonsmooth_tol)
    fail(Err::nonsmooth_tau, "time stencils disagree");

  // tangential derivatives along great circles
  std::vector<Vec> tangents;
  if (n == 2) {
    Vec t1(2);
    t1 << -nu[1], nu[0];
    tangents.push_back(t1);
  } else {
    Vec up = Vec::Zero(3);
    up[2] = 1.0;
    if (std::abs(nu.dot(up)) > 0.9) up << 1.0, 0.0, 0.0;
    const Vec t1 = (up - up.dot(nu) * nu).normalized();
    Vec t2(3);
    t2 << nu[1] * t1[2] - nu[2] * t1[1], nu[2] * t1[0] - nu[0] * t1[2],
        nu[0] * t1[1] - nu[1] * t1[0];
    tangents.push_back(t1);
    tangents.push_back(t2);
  }
  Vec grad_T = Vec::Zero(n);
  for (const Vec& th : tangents) {
    std::array<double, 5> sv;
    for (int k = -2; k <= 2; ++k) {
      const double a = k * opts.dtheta;
      const Vec yk = std::cos(a) * y_star + std::sin(a) * dom.r_omega * th;
      sv[k + 2] = tau(z0, event(t_star, yk));
    }
    const auto [d5, d3] = stencil(sv, opts.dtheta * dom.r_omega);  // arc-length derivative
    if (std::abs(d5 - d3) > opts.nonsmooth_tol)
      fail(Err::nonsmooth_tau, "tangential stencils disagree");
    grad_T += d5 * th;
  }

  // boundary eikonal with g = delta: -(dt tau)^2 + |grad_T|^2 + (dnu tau)^2 = -1
  const double disc = dt5 * dt5 - grad_T.squaredNorm() - 1.0;
  if (disc < opts.degenerate_tol)
    fail(Err::degenerate_root, "eikonal discriminant vanishes (grazing exit)");
  const double dnu = -std::sqrt(disc);  // exiting branch

  Vec grad = Vec::Zero(1 + n);
  grad[0] = dt5;
  grad.segment(1, n) = grad_T + dnu * nu;
  // rescale -grad tau (H = -1/2 normalized) to the entry normalization
  const double c = std::sqrt(-2.0 * H_entry);
  return -c * grad;
}

double eikonal_residual(const StationaryMetric& g, const Vec& z0, const Vec& y, double fd_step,
                        const ShootOptions& opts) {
  const int n = g.dim();
  Vec grad = Vec::Zero(1 + n);
  for (int a = 0; a <= n; ++a) {
    Vec yp = y, ym = y;
    yp[a] += fd_step;
    ym[a] -= fd_step;
    const double tp = time_separation_value(g, z0, yp, opts);
    const double tm = time_separation_value(g, z0, ym, opts);
    grad[a] = (tp - tm) / (2.0 * fd_step);
  }
  const Vec x = y.segment(1, n);
  const double q = grad.dot(g.inverse_at(x) * grad);
  return std::abs(q + 1.0);
}

DistanceResult riemannian_distance(const StationaryMetric& g, const Vec& x, const Vec& y,
                                   const ShootOptions& opts) {
  const int n = g.dim();
  DistanceResult out;
  const Vec chord = y - x;
  const double dist0 = chord.norm();
  if (dist0 < 1e-14) {
    out.distance = 0.0;
    return out;
  }
  Vec xi = chord / dist0;
  double ell = dist0;

  FlowMat S = FlowMat::Zero(2 * n, n);
  S.block(n, 0, n, n) = FlowMat::Identity(n, n);

  for (int it = 1; it <= opts.max_iter; ++it) {
    out.iterations = it;
    const auto vr = spatial_variational_columns(g, {x, xi}, ell, S, opts.flow);
    MetricJet c;
    g.component_jet(x, 0, c);
    const Mat hinv0 = c.h.inverse();

    Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1> R(n + 1);
    R.segment(0, n) = vr.X.x - y;
    R[n] = 0.5 * xi.dot(hinv0 * xi) - 0.5;
    if (R.norm() <= opts.newton_tol) {
      out.distance = ell;
      out.status = SolveStatus::ok;
      out.xi0 = xi;
      return out;
    }

    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4> J(n + 1, n + 1);
    J.block(0, 0, n, n) = vr.M.block(0, 0, n, n);
    MetricJet ce;
    g.component_jet(vr.X.x, 0, ce);
    J.block(0, n, n, 1) = ce.h.inverse() * vr.X.xi;
    J.block(n, 0, 1, n) = (hinv0 * xi).transpose();
    J(n, n) = 0.0;

    const Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1> du = J.partialPivLu().solve(R);
    xi -= du.segment(0, n);
    ell -= du[n];
    if (!(ell > 0.0) || !xi.allFinite()) {
      out.status = SolveStatus::no_convergence;
      return out;
    }
  }
  out.status = SolveStatus::no_convergence;
  return out;
}

std::vector<DistanceSample> boundary_distance_table(const StationaryMetric& g,
                                                    const DistanceTableSpec& spec, int workers,
                                                    const ShootOptions& opts) {
  const SpatialDomain& dom = g.domain();
  const auto pts = boundary_points(dom, spec.points);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < spec.points; ++i)
    for (int j = i + 1; j < spec.points; ++j) {
      if (spec.cone_half_angle) {
        const Vec chord = (pts[j] - pts[i]).normalized();
        if (std::acos(std::min(1.0, std::abs(chord[0]))) > *spec.cone_half_angle) continue;
      }
      pairs.emplace_back(i, j);
    }
  std::vector<DistanceSample> table(pairs.size());
  par_for(pairs.size(), workers, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    DistanceSample& smp = table[k];
    smp.x = pts[i];
    smp.y = pts[j];
    const DistanceResult r = riemannian_distance(g, pts[i], pts[j], opts);
    smp.status = r.status;
    smp.distance = r.status == SolveStatus::ok ? r.distance : 0.0;
  });
  return table;
}

}  // namespace stt
