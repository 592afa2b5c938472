#include "stt/fourier.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "stt/identity.hpp"
#include "stt/parallel.hpp"

namespace stt {

Vec xi_from_eta_p(const Vec& eta, const Vec& p) {
  const int n = static_cast<int>(eta.size());
  const double eta1 = eta[0];
  const Vec etap = eta.segment(1, n - 1);
  const double ep = etap.dot(p);
  const double denom = std::sqrt(ep * ep + eta1 * eta1);
  if (denom < 1e-14) fail(Err::singular_direction, "xi(eta, p) undefined: eta_1 = 0, eta' _|_ p");
  Vec xi(n);
  xi[0] = -ep / denom;
  xi.segment(1, n - 1) = (eta1 / denom) * p;
  return xi;
}

double psi_p(const Vec& eta, const Vec& p) {
  const int n = static_cast<int>(eta.size());
  const double eta1 = eta[0];
  const double ep = eta.segment(1, n - 1).dot(p);
  const double denom = std::sqrt(ep * ep + eta1 * eta1);
  if (denom < 1e-14) fail(Err::singular_direction, "psi_p undefined at the singular set");
  return eta1 / denom;
}

double cutoff(const Vec& eta, const CutoffSpec& spec, const Vec* p) {
  const int n = static_cast<int>(eta.size());
  const double norm = eta.norm();
  if (norm == 0.0) return 0.0;
  double ratio;
  if (spec.kind == CutoffSpec::Kind::lorentzian) {
    ratio = std::abs(eta[0]) / norm;
  } else {
    if (!p) fail(Err::config_error, "riemannian cutoff needs p");
    ratio = (std::abs(eta.segment(1, n - 1).dot(*p)) + std::abs(eta[0])) / norm;
  }
  return smoothstep5((ratio - 0.5 * spec.mu) / (0.5 * spec.mu));
}

// ----- synthetic fields -------------------------------------------------------

double WindowedWaves::window(double r) const {
  return smoothstep5((r1_ - r) / (r1_ - r0_));
}

double WindowedWaves::window_deriv(double r) const {
  return -smoothstep5_deriv((r1_ - r) / (r1_ - r0_)) / (r1_ - r0_);
}

double WindowedWaves::value(const Vec& x) const {
  const double r = x.norm();
  if (r >= r1_) return 0.0;
  double acc = 0.0;
  for (const auto& m : modes_) acc += m.amp * std::cos(m.q.dot(x) + m.phase);
  return acc * window(r);
}

Vec WindowedWaves::grad(const Vec& x) const {
  const double r = x.norm();
  Vec g = Vec::Zero(n_);
  if (r >= r1_) return g;
  double wave = 0.0;
  for (const auto& m : modes_) {
    const double s = std::sin(m.q.dot(x) + m.phase);
    g -= (m.amp * s) * m.q;
    wave += m.amp * std::cos(m.q.dot(x) + m.phase);
  }
  g *= window(r);
  if (r > 1e-12) g += (wave * window_deriv(r) / r) * x;
  return g;
}

void SyntheticTensor::jet(const Vec& x, Mat& m, std::array<Mat, 3>& dm) const {
  m = Mat::Zero(1 + n, 1 + n);
  for (int a = 0; a < n; ++a) dm[a] = Mat::Zero(1 + n, 1 + n);
  m(0, 0) = lam.value(x);
  {
    const Vec g = lam.grad(x);
    for (int a = 0; a < n; ++a) dm[a](0, 0) = g[a];
  }
  for (int j = 0; j + 1 < n; ++j) {
    if (omega[j].empty()) continue;
    const double v = omega[j].value(x);
    const Vec g = omega[j].grad(x);
    m(0, 2 + j) = m(2 + j, 0) = v;
    for (int a = 0; a < n; ++a) dm[a](0, 2 + j) = dm[a](2 + j, 0) = g[a];
  }
  for (int i = 0; i + 1 < n; ++i)
    for (int j = i; j + 1 < n; ++j) {
      const auto& f = h[sym_index(i, j, n - 1)];
      if (f.empty()) continue;
      const double v = f.value(x);
      const Vec g = f.grad(x);
      m(2 + i, 2 + j) = m(2 + j, 2 + i) = v;
      for (int a = 0; a < n; ++a) dm[a](2 + i, 2 + j) = dm[a](2 + j, 2 + i) = g[a];
    }
}

double SyntheticTensor::omega_p_at(const Vec& x, const Vec& p) const {
  double acc = 0.0;
  for (int j = 0; j + 1 < n; ++j)
    if (!omega[j].empty()) acc += omega[j].value(x) * p[j];
  return acc;
}

double SyntheticTensor::h_pp_at(const Vec& x, const Vec& p) const {
  double acc = 0.0;
  for (int i = 0; i + 1 < n; ++i)
    for (int j = i; j + 1 < n; ++j) {
      const auto& f = h[sym_index(i, j, n - 1)];
      if (f.empty()) continue;
      acc += (i == j ? 1.0 : 2.0) * f.value(x) * p[i] * p[j];
    }
  return acc;
}

SyntheticTensor make_synthetic_tensor(const SpatialDomain& dom, const UniformGrid& grid,
                                      const SyntheticSpec& spec) {
  const int n = dom.n;
  SyntheticTensor out;
  out.n = n;
  const double r0 = spec.r_plateau_factor * dom.r_omega;
  const double r1 = spec.r_support_factor * dom.r_omega;
  out.lam = WindowedWaves(n, r0, r1);
  out.omega.assign(n - 1, WindowedWaves(n, r0, r1));
  out.h.assign(sym_count(n - 1), WindowedWaves(n, r0, r1));

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double qmax = spec.q_max_factor * grid.N * grid.freq_step();
  std::uniform_int_distribution<int> kdist(-static_cast<int>(qmax / grid.freq_step()),
                                           static_cast<int>(qmax / grid.freq_step()));
  auto draw_mode = [&]() {
    WaveMode m;
    m.q = Vec::Zero(n);
    for (int i = 0; i < n; ++i) m.q[i] = grid.freq_step() * kdist(rng);
    m.amp = spec.amp * (0.4 + 0.6 * std::abs(unit(rng)));
    m.phase = M_PI * unit(rng);
    return m;
  };
  for (int k = 0; k < spec.modes_per_field; ++k) out.lam.add(draw_mode());
  if (!spec.lam_only) {
    for (int j = 0; j + 1 < n; ++j)
      for (int k = 0; k < spec.modes_per_field; ++k) out.omega[j].add(draw_mode());
    for (int i = 0; i + 1 < n; ++i)
      for (int j = i; j + 1 < n; ++j)
        for (int k = 0; k < spec.modes_per_field; ++k)
          out.h[sym_index(i, j, n - 1)].add(draw_mode());
  }
  return out;
}

// ----- the A transform --------------------------------------------------------

namespace {

struct DirGroup {
  std::array<int, 3> dir;
  std::vector<std::size_t> members;  // flat frequency indices
};

// Groups the (strided) frequency lattice by exact integer direction; the
// cutoff and xi are constant on each group (order-0 homogeneity).
std::vector<DirGroup> direction_groups(const UniformGrid& grid, int stride) {
  const int n = grid.n;
  const int N = grid.N;
  std::map<std::array<int, 3>, std::vector<std::size_t>> groups;
  const std::size_t total = grid.size();
  for (std::size_t f = 0; f < total; ++f) {
    std::size_t rem = f;
    std::array<int, 3> k = {0, 0, 0};
    bool keep = true;
    for (int i = n - 1; i >= 0; --i) {
      int ki = static_cast<int>(rem % N);
      rem /= N;
      if (ki % stride != 0) keep = false;
      if (ki >= N / 2) ki -= N;
      k[i] = ki;
    }
    if (!keep) continue;
    if (k[0] == 0 && k[1] == 0 && k[2] == 0) continue;
    int g = 0;
    for (int i = 0; i < n; ++i) g = std::gcd(g, std::abs(k[i]));
    std::array<int, 3> dir = {k[0] / g, k[1] / g, n == 3 ? k[2] / g : 0};
    groups[dir].push_back(f);
  }
  std::vector<DirGroup> out;
  out.reserve(groups.size());
  for (auto& [dir, members] : groups) out.push_back({dir, std::move(members)});
  return out;
}

}  // namespace

// Orthonormal basis of xi-perp (the initial-point hyperplane).
std::vector<Vec> xi_perp_basis(const Vec& xi) {
  const int n = static_cast<int>(xi.size());
  std::vector<Vec> basis;
  if (n == 2) {
    Vec q(2);
    q << -xi[1], xi[0];
    basis.push_back(q);
  } else {
    int axis = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(xi[i]) < std::abs(xi[axis])) axis = i;
    Vec e = Vec::Zero(3);
    e[axis] = 1.0;
    Vec q1 = (e - e.dot(xi) * xi).normalized();
    Vec q2(3);
    q2 << xi[1] * q1[2] - xi[2] * q1[1], xi[2] * q1[0] - xi[0] * q1[2],
        xi[0] * q1[1] - xi[1] * q1[0];
    basis.push_back(q1);
    basis.push_back(q2);
  }
  return basis;
}

namespace {

int odd_node_count(double span, double step, int min_nodes = 5) {
  int k = std::max(min_nodes, static_cast<int>(std::ceil(span / step)) + 1);
  if (k % 2 == 0) ++k;
  return k;
}

struct RaySet {
  // midpoint u-lattice over [-extent, extent]^(n-1)
  int points_per_axis;
  double extent;
  double du;
  int count;  // points_per_axis^(n-1)

  Vec offsets(int flat, int n) const {
    Vec u = Vec::Zero(n - 1);
    int rem = flat;
    for (int i = 0; i < n - 1; ++i) {
      u[i] = -extent + (rem % points_per_axis + 0.5) * du;
      rem /= points_per_axis;
    }
    return u;
  }
};

RaySet make_ray_set(const SpatialDomain& dom, int y_points, int n) {
  RaySet rs;
  rs.points_per_axis = y_points;
  rs.extent = dom.rho;
  rs.du = 2.0 * dom.rho / y_points;
  rs.count = n == 2 ? y_points : y_points * y_points;
  return rs;
}

}  // namespace

ASpectrum assemble_direction_spectrum(
    const SpatialDomain& dom, const UniformGrid& grid, const ATransformOptions& opt,
    const std::function<Vec(const Vec& xi, const Vec& y, bool& failed)>& ray_integral) {
  const int n = dom.n;
  ASpectrum out;
  out.grid = grid;
  auto groups = direction_groups(grid, opt.eta_stride);

  // keep only directions inside the cutoff support
  std::vector<DirGroup> kept;
  for (auto& g : groups) {
    Vec dir = Vec::Zero(n);
    for (int i = 0; i < n; ++i) dir[i] = g.dir[i];
    if (cutoff(dir, opt.chi, &opt.p) > 0.0) kept.push_back(std::move(g));
  }

  struct GroupResult {
    std::vector<std::size_t> eta;
    std::vector<CVec> value;
    int status = 0;
  };
  std::vector<GroupResult> results(kept.size());

  const RaySet rs = make_ray_set(dom, opt.y_points, n);
  par_for(kept.size(), opt.workers, [&](std::size_t gi) {
    const auto& grp = kept[gi];
    GroupResult& res = results[gi];
    Vec dir = Vec::Zero(n);
    for (int i = 0; i < n; ++i) dir[i] = grp.dir[i];
    const double chi_val = cutoff(dir, opt.chi, &opt.p);
    const Vec xi = xi_from_eta_p(dir, opt.p);
    const auto basis = xi_perp_basis(xi);

    std::vector<Vec> integrals(rs.count, Vec::Zero(1 + n));
    bool failed = false;
    for (int r = 0; r < rs.count && !failed; ++r) {
      const Vec u = rs.offsets(r, n);
      Vec y = Vec::Zero(n);
      for (int b = 0; b + 1 < n; ++b) y += u[b] * basis[b];
      integrals[r] = ray_integral(xi, y, failed);
    }

    res.eta.reserve(grp.members.size());
    res.value.reserve(grp.members.size());
    res.status = failed ? 1 : 0;
    const double cell = std::pow(rs.du, n - 1);
    for (std::size_t f : grp.members) {
      const Vec eta = grid.freq(f);
      CVec val = CVec::Zero(1 + n);
      if (!failed) {
        // eta . y(u) = sum_b u_b (eta . basis_b)
        Vec eb = Vec::Zero(n - 1);
        for (int b = 0; b + 1 < n; ++b) eb[b] = eta.dot(basis[b]);
        for (int r = 0; r < rs.count; ++r) {
          const Vec u = rs.offsets(r, n);
          const cplx ph = std::polar(cell, -eb.dot(u));
          for (int c = 0; c <= n; ++c) val[c] += ph * integrals[r][c];
        }
        val *= chi_val;
      }
      res.eta.push_back(f);
      res.value.push_back(val);
    }
  });

  for (auto& res : results) {
    for (std::size_t k = 0; k < res.eta.size(); ++k) {
      out.eta.push_back(res.eta[k]);
      out.value.push_back(res.value[k]);
      out.status.push_back(res.status);
    }
  }
  return out;
}

double ASpectrum::max_abs() const {
  double m = 0.0;
  for (const auto& v : value)
    for (int c = 0; c < v.size(); ++c) m = std::max(m, std::abs(v[c]));
  return m;
}

namespace {

// One windowed cosine mode contracted against the fixed covector: the ray
// integrand is the gradient of coef * W(|x|) cos(q.x + phase). Phases advance
// linearly along the ray, so sin/cos are updated by a complex rotation per
// node instead of being recomputed.
struct ContractedMode {
  double coef;
  Vec q;
  double phase;
};

// Collects all component modes of the synthetic tensor contracted with
// zeta = (rho, xi): m zeta.zeta = rho^2 m_lam + 2 rho (m_omega . xi')
// + m_h xi'.xi'. With zeta_time = 0 this reduces to the spatial contraction.
std::vector<ContractedMode> contract_modes(const SyntheticTensor& m, const Vec& zeta_spatial,
                                           double rho_param) {
  const int n = m.n;
  std::vector<ContractedMode> out;
  // slots: m_lam at (0,0), omega[j] at (0, 2+j), h[i,j] at (2+i, 2+j)
  for (const auto& mode : m.lam.modes())
    out.push_back({rho_param * rho_param * mode.amp, mode.q, mode.phase});
  for (int j = 0; j + 1 < n; ++j)
    for (const auto& mode : m.omega[j].modes())
      out.push_back({2.0 * rho_param * zeta_spatial[2 + j] * mode.amp, mode.q, mode.phase});
  for (int i = 0; i + 1 < n; ++i)
    for (int j = i; j + 1 < n; ++j)
      for (const auto& mode : m.h[sym_index(i, j, n - 1)].modes())
        out.push_back({(i == j ? 1.0 : 2.0) * zeta_spatial[2 + i] * zeta_spatial[2 + j] * mode.amp,
                       mode.q, mode.phase});
  return out;
}

// Simpson integral over the chord of the gradient of
// sum_k coef_k W(|x|) cos(q_k.x + phase_k), returned in slots 1..n.
Vec windowed_mode_ray_integral(const WindowedWaves& window_src,
                               const std::vector<ContractedMode>& modes, const Vec& y,
                               const Vec& xi, double s_step) {
  const int n = static_cast<int>(y.size());
  Vec acc = Vec::Zero(1 + n);
  const double r1 = window_src.r_support();
  const double q2 = y.squaredNorm();
  if (q2 >= r1 * r1) return acc;
  const double T = std::sqrt(r1 * r1 - q2);
  const int K = odd_node_count(2 * T, s_step);
  const double hs = 2 * T / (K - 1);

  const std::size_t M = modes.size();
  std::vector<double> c(M), s(M), rc(M), rs(M);
  for (std::size_t k = 0; k < M; ++k) {
    const double th0 = modes[k].q.dot(y - T * xi) + modes[k].phase;
    c[k] = std::cos(th0);
    s[k] = std::sin(th0);
    const double dth = modes[k].q.dot(xi) * hs;
    rc[k] = std::cos(dth);
    rs[k] = std::sin(dth);
  }
  for (int node = 0; node < K; ++node) {
    const double t = -T + node * hs;
    const Vec x = y + t * xi;
    const double r = x.norm();
    const double W = window_src.window(r);
    const double dW = window_src.window_deriv(r);
    const double w = (node == 0 || node == K - 1) ? 1.0 : (node % 2 == 1 ? 4.0 : 2.0);
    const double wq = w * hs / 3.0;
    double wave = 0.0;  // sum coef cos
    Vec qsin = Vec::Zero(n);
    for (std::size_t k = 0; k < M; ++k) {
      wave += modes[k].coef * c[k];
      qsin += (modes[k].coef * s[k]) * modes[k].q;
      const double cn = c[k] * rc[k] - s[k] * rs[k];
      s[k] = s[k] * rc[k] + c[k] * rs[k];
      c[k] = cn;
    }
    // grad = -W * sum coef sin q + (dW/r) wave x
    Vec grad = -W * qsin;
    if (r > 1e-12) grad += (dW * wave / r) * x;
    acc.segment(1, n) += wq * grad;
  }
  return acc;
}

}  // namespace

ASpectrum transform_A_synthetic(const SyntheticTensor& m, const SpatialDomain& dom,
                                const UniformGrid& grid, const ATransformOptions& opt) {
  const int n = dom.n;
  auto ray_integral = [&](const Vec& xi, const Vec& y, bool& /*failed*/) {
    Vec zeta = Vec::Zero(1 + n);
    zeta[0] = opt.rho_param;
    zeta.segment(1, n) = xi;
    const auto modes = contract_modes(m, zeta, opt.rho_param);
    return windowed_mode_ray_integral(m.lam, modes, y, xi, opt.s_step);
  };
  return assemble_direction_spectrum(dom, grid, opt, ray_integral);
}

ASpectrum transform_A_pair(const StationaryMetric& g1, const StationaryMetric& g2,
                           const UniformGrid& grid, const ATransformOptions& opt) {
  const SpatialDomain& dom = g1.domain();
  const int n = dom.n;
  const double rho = dom.rho;
  const double r2 = dom.r_omega * dom.r_omega;

  auto ray_integral = [&](const Vec& xi, const Vec& y, bool& failed) -> Vec {
    Vec acc = Vec::Zero(1 + n);
    // straight-line entry test: x(0) = y - rho xi, velocity xi
    const Vec x0 = y - rho * xi;
    const double a = 1.0, b = 2.0 * x0.dot(xi), c = x0.squaredNorm() - r2;
    const double disc = b * b - 4.0 * a * c;
    if (disc <= 0.0) return acc;  // misses Omega: integrand vanishes

    PhaseState Z0;
    Z0.z = Vec::Zero(1 + n);
    Z0.z[0] = rho * opt.rho_param;
    Z0.z.segment(1, n) = x0;
    Z0.zeta = Vec::Zero(1 + n);
    Z0.zeta[0] = opt.rho_param;
    Z0.zeta.segment(1, n) = xi;

    try {
      const double s_in = (-b - std::sqrt(disc)) / (2.0 * a);
      const Trajectory tr =
          integrate_bicharacteristic(g1, Z0, FlowMode::until_exit, 0.0, opt.flow);
      const double ell = tr.ell;

      // leading term on the fine grid
      const int K = odd_node_count(ell - s_in, opt.s_step);
      std::vector<double> params(K);
      const double hs = (ell - s_in) / (K - 1);
      for (int k = 0; k < K; ++k) params[k] = s_in + k * hs;
      const auto states = flow_states_at_params(g1, Z0, params, opt.flow);
      for (int k = 0; k < K; ++k) {
        const double w = (k == 0 || k == K - 1) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        acc += (w * hs / 3.0) * identity3_integrand(g1, g2, states[k], nullptr, nullptr);
      }

      if (opt.with_B) {
        const int d = 1 + n;
        const int KB = (opt.b_samples % 2 == 1) ? opt.b_samples : opt.b_samples + 1;
        std::vector<double> bparams(KB);
        const double hb = (ell - s_in) / (KB - 1);
        for (int k = 0; k < KB; ++k) bparams[k] = s_in + k * hb;
        const auto bstates = flow_states_at_params(g1, Z0, bparams, opt.flow);
        const FlowMat I2d = FlowMat::Identity(2 * d, 2 * d);
        for (int k = 0; k < KB; ++k) {
          const auto vr = variational_columns(g2, bstates[k], ell - bparams[k], I2d, opt.flow);
          const FlowMat B = vr.M - [&] {
            FlowMat M = FlowMat::Identity(2 * d, 2 * d);
            M.block(0, d, d, d) = (ell - bparams[k]) * minkowski(n);
            return M;
          }();
          const Mat B21 = B.block(d, 0, d, d), B22 = B.block(d, d, d, d);
          const Vec with_b = identity3_integrand(g1, g2, bstates[k], &B21, &B22);
          const Vec without_b = identity3_integrand(g1, g2, bstates[k], nullptr, nullptr);
          const double w = (k == 0 || k == KB - 1) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
          acc += (w * hb / 3.0) * (with_b - without_b);
        }
      }
    } catch (const Error&) {
      failed = true;
      return Vec::Zero(1 + n);
    }
    return acc;
  };
  return assemble_direction_spectrum(dom, grid, opt, ray_integral);
}

ASpectrum oracle_A_spectrum(const SyntheticTensor& m, const SpatialDomain& dom,
                            const UniformGrid& grid, const ATransformOptions& opt) {
  const int n = dom.n;
  // contracted component fields sampled on the grid
  std::vector<double> f_lam(grid.size()), f_om(grid.size()), f_h(grid.size());
  par_for(grid.size(), opt.workers, [&](std::size_t k) {
    const Vec x = grid.point(k);
    f_lam[k] = m.lam_at(x);
    f_om[k] = m.omega_p_at(x, opt.p);
    f_h[k] = m.h_pp_at(x, opt.p);
  });
  const auto hat_lam = dft_plain(grid, f_lam, opt.workers);
  const auto hat_om = dft_plain(grid, f_om, opt.workers);
  const auto hat_h = dft_plain(grid, f_h, opt.workers);

  ASpectrum out;
  out.grid = grid;
  auto groups = direction_groups(grid, opt.eta_stride);
  for (const auto& grp : groups) {
    Vec dir = Vec::Zero(n);
    for (int i = 0; i < n; ++i) dir[i] = grp.dir[i];
    const double chi_val = cutoff(dir, opt.chi, &opt.p);
    if (chi_val <= 0.0) continue;
    const double pp = psi_p(dir, opt.p);
    const double r = opt.rho_param;
    for (std::size_t f : grp.members) {
      const Vec eta = grid.freq(f);
      const cplx combo =
          r * r * hat_lam[f] + 2.0 * r * pp * hat_om[f] + pp * pp * hat_h[f];
      CVec val = CVec::Zero(1 + n);
      for (int j = 0; j < n; ++j) val[1 + j] = cplx(0.0, 1.0) * eta[j] * combo * chi_val;
      out.eta.push_back(f);
      out.value.push_back(val);
      out.status.push_back(0);
    }
  }
  return out;
}

double relative_l2_gap(const ASpectrum& a, const ASpectrum& b) {
  if (a.eta.size() != b.eta.size()) fail(Err::config_error, "spectra have different supports");
  // entries may be ordered differently; index b by flat eta
  std::map<std::size_t, std::size_t> bidx;
  for (std::size_t k = 0; k < b.eta.size(); ++k) bidx[b.eta[k]] = k;
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.eta.size(); ++k) {
    const auto it = bidx.find(a.eta[k]);
    if (it == bidx.end()) fail(Err::config_error, "spectra have different supports");
    const CVec& va = a.value[k];
    const CVec& vb = b.value[it->second];
    for (int c = 0; c < va.size(); ++c) {
      num += std::norm(va[c] - vb[c]);
      den += std::norm(vb[c]);
    }
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

AComponents extract_components(const ASpectrum& r1p, const ASpectrum& r1m, const ASpectrum& r2p,
                               const ASpectrum& r2m, double rho1, double rho2) {
  if (std::abs(rho2 * rho2 - rho1 * rho1) < 1e-4)
    fail(Err::ill_conditioned, "rho_1 and rho_2 too close for the elimination");
  AComponents out;
  out.A1.grid = out.A2.grid = out.A3.grid = r1p.grid;
  const std::size_t K = r1p.eta.size();
  if (r1m.eta.size() != K || r2p.eta.size() != K || r2m.eta.size() != K)
    fail(Err::config_error, "spectra have different supports");
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t f = r1p.eta[k];
    if (r1m.eta[k] != f || r2p.eta[k] != f || r2m.eta[k] != f)
      fail(Err::config_error, "spectra are not aligned");
    const CVec even1 = r1p.value[k] + r1m.value[k];
    const CVec even2 = r2p.value[k] + r2m.value[k];
    const CVec A2 = (r1p.value[k] - r1m.value[k]) / (4.0 * rho1);
    const CVec A1 = (even2 - even1) / (2.0 * (rho2 * rho2 - rho1 * rho1));
    const CVec A3 = 0.5 * even1 - rho1 * rho1 * A1;
    out.A1.eta.push_back(f);
    out.A2.eta.push_back(f);
    out.A3.eta.push_back(f);
    out.A1.value.push_back(A1);
    out.A2.value.push_back(A2);
    out.A3.value.push_back(A3);
    const int st = std::max(std::max(r1p.status[k], r1m.status[k]),
                            std::max(r2p.status[k], r2m.status[k]));
    out.A1.status.push_back(st);
    out.A2.status.push_back(st);
    out.A3.status.push_back(st);
  }
  return out;
}

// ----- phase change of variables ----------------------------------------------

namespace {

// Inverts the ray-family map (u, s) -> x_{g1}(s; y(u)) at the target point.
struct RayInverse {
  Vec u;      // offsets in the xi-perp basis
  double s;
  Mat dx_dus; // n x n Jacobian d x / d(u, s)
};

RayInverse invert_ray_map(const StationaryMetric& g1, const Vec& target, const Vec& xi,
                          const std::vector<Vec>& basis, double rho_param,
                          const FlowOptions& opts) {
  const SpatialDomain& dom = g1.domain();
  const int n = dom.n;
  const int d = 1 + n;
  const double rho = dom.rho;

  RayInverse out;
  out.u = Vec::Zero(n - 1);
  for (int b = 0; b + 1 < n; ++b) out.u[b] = target.dot(basis[b]);
  out.s = rho + target.dot(xi);

  FlowMat S = FlowMat::Zero(2 * d, n - 1);
  for (int b = 0; b + 1 < n; ++b) S.block(1, b, n, 1) = basis[b];

  for (int it = 0; it < 50; ++it) {
    Vec y = Vec::Zero(n);
    for (int b = 0; b + 1 < n; ++b) y += out.u[b] * basis[b];
    PhaseState Z0;
    Z0.z = Vec::Zero(d);
    Z0.z[0] = rho * rho_param;
    Z0.z.segment(1, n) = y - rho * xi;
    Z0.zeta = Vec::Zero(d);
    Z0.zeta[0] = rho_param;
    Z0.zeta.segment(1, n) = xi;

    const auto vr = variational_columns(g1, Z0, out.s, S, opts);
    const Vec x = vr.X.z.segment(1, n);
    const Vec r = x - target;

    Mat J(n, n);
    for (int b = 0; b + 1 < n; ++b) J.col(b) = vr.M.block(1, b, n, 1);
    const Vec x_arr = vr.X.z.segment(1, n);
    J.col(n - 1) = (g1.inverse_at(x_arr) * vr.X.zeta).segment(1, n);

    if (r.norm() <= 1e-12 * std::max(1.0, rho)) {
      out.dx_dus = J;
      return out;
    }
    const Vec du = J.partialPivLu().solve(r);
    for (int b = 0; b + 1 < n; ++b) out.u[b] -= du[b];
    out.s -= du[n - 1];
    if (!out.u.allFinite() || !std::isfinite(out.s))
      fail(Err::fold_detected, "ray-family inversion diverged");
  }
  fail(Err::fold_detected, "ray-family inversion did not converge");
}

}  // namespace

PhaseChange phase_change_of_variables(const StationaryMetric& g1, const Vec& x, const Vec& y,
                                      const Vec& eta, const Vec& p, double rho_param,
                                      const FlowOptions& opts) {
  const int n = g1.dim();
  const Vec xi = xi_from_eta_p(eta, p);
  const auto basis = xi_perp_basis(xi);

  Mat Jdelta(n, n);  // d x_delta / d (u, s) = [basis | xi]
  for (int b = 0; b + 1 < n; ++b) Jdelta.col(b) = basis[b];
  Jdelta.col(n - 1) = xi;
  const double det_delta = Jdelta.determinant();

  // Gauss-Legendre 5-point on [0, 1]
  static const double gl_x[5] = {0.04691007703066800, 0.23076534494715845, 0.5,
                                 0.76923465505284155, 0.95308992296933200};
  static const double gl_w[5] = {0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
                                 0.23931433524968324, 0.11846344252809454};

  Mat S = Mat::Zero(n, n);  // int of d x_delta / d x
  double J1_at_x = 1.0;
  for (int q = 0; q < 5; ++q) {
    const Vec w = y + gl_x[q] * (x - y);
    const RayInverse inv = invert_ray_map(g1, w, xi, basis, rho_param, opts);
    const Mat dxdelta_dx = Jdelta * inv.dx_dus.partialPivLu().inverse();
    S += gl_w[q] * dxdelta_dx;
  }
  {
    const RayInverse inv = invert_ray_map(g1, x, xi, basis, rho_param, opts);
    J1_at_x = inv.dx_dus.determinant() / det_delta;
  }

  PhaseChange out;
  out.theta = S.transpose() * eta;
  out.J2 = S.determinant();
  out.J1 = J1_at_x;
  return out;
}

// ----- FIO norm experiment ------------------------------------------------------

double FioAmplitude::value(const Vec& x, const Vec& y, const Vec& xi) const {
  double v = 1.0;
  for (std::size_t i = 0; i < gx.size(); ++i)
    v *= gx[i].scale * std::exp(-0.5 * std::pow((x[i] - gx[i].center) / gx[i].sigma, 2));
  for (std::size_t i = 0; i < gy.size(); ++i)
    v *= gy[i].scale * std::exp(-0.5 * std::pow((y[i] - gy[i].center) / gy[i].sigma, 2));
  if (xi_modulated) {
    const double nn = xi.squaredNorm();
    v *= nn > 0 ? xi[0] * xi[0] / nn : 0.0;
  }
  return v;
}

double FioAmplitude::abs_deriv_integral(const Gauss& g, int k) {
  // d^k/dt^k [scale e^{-u^2/2}] = scale sigma^{-k} (-1)^k He_k(u) e^{-u^2/2}
  const int Q = 4001;
  const double lo = g.center - 10.0 * g.sigma, hi = g.center + 10.0 * g.sigma;
  const double h = (hi - lo) / (Q - 1);
  double acc = 0.0;
  for (int i = 0; i < Q; ++i) {
    const double t = lo + i * h;
    const double u = (t - g.center) / g.sigma;
    double he0 = 1.0, he1 = u;
    double he = k == 0 ? he0 : he1;
    for (int m = 2; m <= k; ++m) {
      const double next = u * he1 - (m - 1) * he0;
      he0 = he1;
      he1 = next;
      he = next;
    }
    if (k == 0) he = 1.0;
    const double v = std::abs(g.scale * std::pow(g.sigma, -k) * he) * std::exp(-0.5 * u * u);
    acc += (i == 0 || i == Q - 1 ? 0.5 : 1.0) * v;
  }
  return acc * h;
}

std::vector<cplx> fio_kernel(const FioAmplitude& a, const UniformGrid& pos_grid, int workers) {
  const int n = pos_grid.n;
  const int N = pos_grid.N;
  const std::size_t count = pos_grid.size();

  // xi-sum table over coordinate differences (depends on y - x only)
  const int D = 2 * N - 1;
  const double dxi = pos_grid.freq_step();
  std::size_t table_size = 1;
  for (int i = 0; i < n; ++i) table_size *= D;
  std::vector<cplx> table(table_size);
  par_for(table_size, workers, [&](std::size_t t) {
    std::size_t rem = t;
    double v[3] = {0, 0, 0};
    for (int i = n - 1; i >= 0; --i) {
      const int di = static_cast<int>(rem % D) - (N - 1);
      rem /= D;
      v[i] = di * pos_grid.spacing();
    }
    cplx acc(0, 0);
    // full centered xi lattice
    std::size_t total = pos_grid.size();
    for (std::size_t f = 0; f < total; ++f) {
      const Vec xi = pos_grid.freq(f);
      double dot = 0.0;
      for (int i = 0; i < n; ++i) dot += v[i] * xi[i];
      double mod = 1.0;
      if (a.xi_modulated) {
        const double nn = xi.squaredNorm();
        mod = nn > 0 ? xi[0] * xi[0] / nn : 0.0;
      }
      acc += std::polar(mod, dot);
    }
    table[t] = acc * std::pow(dxi, n);
  });

  // separable (x, y) profiles
  std::vector<double> Ax(count), By(count);
  for (std::size_t k = 0; k < count; ++k) {
    const Vec x = pos_grid.point(k);
    double ax = 1.0, by = 1.0;
    for (int i = 0; i < n; ++i) {
      ax *= a.gx[i].scale * std::exp(-0.5 * std::pow((x[i] - a.gx[i].center) / a.gx[i].sigma, 2));
      by *= a.gy[i].scale * std::exp(-0.5 * std::pow((x[i] - a.gy[i].center) / a.gy[i].sigma, 2));
    }
    Ax[k] = ax;
    By[k] = by;
  }

  std::vector<cplx> K(count * count);
  par_for(count, workers, [&](std::size_t i) {
    const Vec xi_pt = pos_grid.point(i);
    for (std::size_t j = 0; j < count; ++j) {
      const Vec yj = pos_grid.point(j);
      std::size_t t = 0;
      for (int axis = 0; axis < n; ++axis) {
        const int di =
            static_cast<int>(std::lround((yj[axis] - xi_pt[axis]) / pos_grid.spacing())) +
            (N - 1);
        t = t * D + static_cast<std::size_t>(di);
      }
      K[i * count + j] = Ax[i] * By[j] * table[t];
    }
  });
  return K;
}

FioResult fio_norm_experiment(const FioAmplitude& a, const UniformGrid& pos_grid, int workers) {
  const int n = pos_grid.n;
  const std::size_t count = pos_grid.size();
  const auto K = fio_kernel(a, pos_grid, workers);

  // power iteration on K^H K
  std::vector<cplx> v(count, cplx(1.0 / std::sqrt(double(count)), 0.0)), w(count), u(count);
  double sigma = 0.0;
  int it = 0;
  for (; it < 5000; ++it) {
    // w = K v
    par_for(count, workers, [&](std::size_t i) {
      cplx acc(0, 0);
      const cplx* row = &K[i * count];
      for (std::size_t j = 0; j < count; ++j) acc += row[j] * v[j];
      w[i] = acc;
    });
    // u = K^H w
    par_for(count, workers, [&](std::size_t j) {
      cplx acc(0, 0);
      for (std::size_t i = 0; i < count; ++i) acc += std::conj(K[i * count + j]) * w[i];
      u[j] = acc;
    });
    double nw = 0.0, nu = 0.0;
    for (std::size_t i = 0; i < count; ++i) nw += std::norm(w[i]);
    for (std::size_t i = 0; i < count; ++i) nu += std::norm(u[i]);
    const double sigma_new = std::sqrt(std::sqrt(nu));  // ||K^H K v||^(1/2) ~ sigma
    nu = std::sqrt(nu);
    for (std::size_t i = 0; i < count; ++i) v[i] = u[i] / nu;
    if (it > 4 && std::abs(sigma_new - sigma) <= 1e-13 * std::max(1.0, sigma)) {
      sigma = sigma_new;
      break;
    }
    sigma = sigma_new;
  }

  FioResult out;
  out.iterations = it + 1;
  out.norm_P = sigma * std::pow(pos_grid.spacing(), n);

  // hypothesis bound: sum over |alpha| + |beta| <= 2n+1 of the separable
  // derivative integrals; the xi factor has modulus <= 1.
  const int kmax = 2 * n + 1;
  std::vector<std::vector<double>> ix(n), iy(n);
  for (int i = 0; i < n; ++i) {
    ix[i].resize(kmax + 1);
    iy[i].resize(kmax + 1);
    for (int k = 0; k <= kmax; ++k) {
      ix[i][k] = FioAmplitude::abs_deriv_integral(a.gx[i], k);
      iy[i][k] = FioAmplitude::abs_deriv_integral(a.gy[i], k);
    }
  }
  double M = 0.0;
  // enumerate multi-indices alpha, beta over n axes each
  std::function<void(int, int, double, bool)> walk = [&](int axis, int budget, double prod,
                                                         bool on_beta) {
    if (axis == n) {
      if (!on_beta) {
        walk(0, budget, prod, true);
      } else {
        M += prod;
      }
      return;
    }
    const auto& tab = on_beta ? iy[axis] : ix[axis];
    for (int k = 0; k <= budget; ++k) walk(axis + 1, budget - k, prod * tab[k], on_beta);
  };
  walk(0, kmax, 1.0, false);

  out.M = M;
  out.ratio = out.M > 0 ? out.norm_P / out.M : 0.0;
  return out;
}

// ----- cone estimate and contraction --------------------------------------------

double sobolev_norm(const UniformGrid& grid, const std::vector<cplx>& fhat, double s) {
  std::vector<double> sq(fhat.size());
  for (std::size_t f = 0; f < fhat.size(); ++f) {
    const Vec th = grid.freq(f);
    sq[f] = std::pow(1.0 + th.squaredNorm(), s) * std::norm(fhat[f]);
  }
  const double dth = grid.freq_step();
  return std::sqrt(pairwise_sum(sq) * std::pow(dth / (2.0 * M_PI), grid.n));
}

ConeResult cone_estimate_experiment(const std::vector<double>& field, const UniformGrid& grid,
                                    const std::vector<double>& mu_list, double K, int workers) {
  ConeResult out;
  const auto fhat = dft_plain(grid, field, workers);
  const double h1 = sobolev_norm(grid, fhat, 1.0);
  const double h2 = sobolev_norm(grid, fhat, 2.0);
  out.h2_over_h1 = h1 > 0 ? h2 / h1 : 0.0;
  if (h2 > K * h1) fail(Err::k_violated, "H2/H1 precondition fails for this field");

  const double measure = std::pow(grid.freq_step() / (2.0 * M_PI), grid.n);
  std::vector<double> all(fhat.size(), 0.0);
  for (std::size_t f = 0; f < fhat.size(); ++f) {
    const Vec th = grid.freq(f);
    all[f] = th.squaredNorm() * std::norm(fhat[f]);
  }
  out.grad_norm = std::sqrt(pairwise_sum(all) * measure);

  out.mu = mu_list;
  out.ratio.resize(mu_list.size());
  for (std::size_t mi = 0; mi < mu_list.size(); ++mi) {
    const double mu = mu_list[mi];
    std::vector<double> cone(fhat.size(), 0.0);
    for (std::size_t f = 0; f < fhat.size(); ++f) {
      const Vec th = grid.freq(f);
      const double nn = th.norm();
      if (nn == 0.0) continue;
      if (std::abs(th[0]) / nn <= mu) cone[f] = th.squaredNorm() * std::norm(fhat[f]);
    }
    out.ratio[mi] = out.grad_norm > 0
                        ? std::sqrt(pairwise_sum(cone) * measure) / out.grad_norm
                        : 0.0;
  }
  out.best_mu_attaining_third = 0.0;
  for (std::size_t mi = 0; mi < mu_list.size(); ++mi)
    if (out.ratio[mi] <= 1.0 / 3.0)
      out.best_mu_attaining_third = std::max(out.best_mu_attaining_third, mu_list[mi]);
  return out;
}

ContractionReport contraction_diagnostic(const TensorDifference& m, double eps, double slack,
                                         double floor_abs, int workers) {
  const int n = m.n;
  ContractionReport rep;
  rep.eps = eps;
  rep.mu = std::pow(eps, 1.0 / 8.0);
  rep.m_max = m.max_abs;

  struct Comp {
    const ScalarLattice* f;
    double mult;
    int group;  // 0 = lam, 1 = omega, 2 = h
  };
  std::vector<Comp> comps;
  comps.push_back({&m.m_lam, 1.0, 0});
  for (int j = 1; j < n; ++j) comps.push_back({&m.m_omega[j], 2.0, 1});
  for (int i = 1; i < n; ++i)
    for (int j = i; j < n; ++j)
      comps.push_back({&m.m_h[sym_index(i, j, n)], i == j ? 1.0 : 2.0, 2});

  const UniformGrid& grid = m.grid;
  const double measure = std::pow(grid.freq_step() / (2.0 * M_PI), grid.n);
  double total = 0.0, cone = 0.0;
  double high[3] = {0.0, 0.0, 0.0};
  for (const auto& comp : comps) {
    const auto fhat = dft_plain(grid, comp.f->values(), workers);
    for (std::size_t f = 0; f < fhat.size(); ++f) {
      const Vec th = grid.freq(f);
      const double nn = th.norm();
      const double e = comp.mult * th.squaredNorm() * std::norm(fhat[f]) * measure;
      total += e;
      if (nn == 0.0) continue;
      if (std::abs(th[0]) / nn > rep.mu)
        high[comp.group] += e;
      else
        cone += e;
    }
  }
  rep.grad_m_norm = std::sqrt(total);
  rep.high_lam = std::sqrt(high[0]);
  rep.high_omega = std::sqrt(high[1]);
  rep.high_h = std::sqrt(high[2]);
  rep.cone_norm = std::sqrt(cone);

  const double se = std::sqrt(eps);
  rep.ratio_lam = rep.high_lam / (se * rep.grad_m_norm + floor_abs);
  rep.ratio_omega = rep.high_omega / ((se / rep.mu) * rep.grad_m_norm + floor_abs);
  rep.ratio_h = rep.high_h / ((se / (rep.mu * rep.mu)) * rep.grad_m_norm + floor_abs);
  rep.combined_lhs =
      std::sqrt(high[0] + high[1] + high[2]) + rep.cone_norm;
  rep.pass = rep.ratio_lam <= slack && rep.ratio_omega <= slack && rep.ratio_h <= slack;
  return rep;
}

}  // namespace stt
