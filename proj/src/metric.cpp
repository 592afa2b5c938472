#include "stt/metric.hpp"

#include <cmath>
#include <random>

namespace stt {

void SpatialDomain::validate() const {
  if (n < 2 || n > 3) fail(Err::config_error, "spatial dimension must be 2 or 3");
  if (!(r_omega > 0.0)) fail(Err::config_error, "r_omega must be positive");
  if (!(r_omega < rho)) fail(Err::config_error, "need r_omega < rho");
  if (!(std::abs(h_offset) > r_omega))
    fail(Err::config_error, "hyperplane H must lie outside Omega: |h_offset| > r_omega");
}

void MetricJet::resize(int n_, int order_) {
  n = n_;
  order = order_;
  lam = 1.0;
  omega = Vec::Zero(n);
  h = Mat::Identity(n, n);
  if (order >= 1) {
    dlam = Vec::Zero(n);
    domega = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) dh[i] = Mat::Zero(n, n);
  }
  if (order >= 2) {
    d2lam = Mat::Zero(n, n);
    for (int p = 0; p < sym_count(n); ++p) {
      d2omega[p] = Vec::Zero(n);
      d2h[p] = Mat::Zero(n, n);
    }
  }
}

void StationaryMetric::metric_jet(const Vec& x, int order, GJet& out) const {
  const int n = dim();
  MetricJet c;
  component_jet(x, order, c);
  out.n = n;
  out.order = order;
  auto assemble = [n](double lam, const Vec& om, const Mat& h) {
    Mat G(1 + n, 1 + n);
    G(0, 0) = -lam;
    for (int j = 0; j < n; ++j) {
      G(0, 1 + j) = om[j];
      G(1 + j, 0) = om[j];
      for (int k = 0; k < n; ++k) G(1 + j, 1 + k) = h(j, k);
    }
    return G;
  };
  out.G = assemble(c.lam, c.omega, c.h);
  if (order >= 1) {
    for (int i = 0; i < n; ++i)
      out.dG[i] = assemble(c.dlam[i], c.domega.row(i).transpose(), c.dh[i]);
  }
  if (order >= 2) {
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const int p = sym_index(i, j, n);
        out.d2G[p] = assemble(c.d2lam(i, j), c.d2omega[p], c.d2h[p]);
      }
  }
}

void StationaryMetric::inverse_jet(const Vec& x, int order, GJet& out) const {
  const int n = dim();
  GJet gj;
  metric_jet(x, order, gj);
  out.n = n;
  out.order = order;
  Eigen::FullPivLU<Mat> lu(gj.G);
  if (lu.rcond() < 1e-12) fail(Err::singular, "metric matrix is numerically singular");
  const Mat Ginv = lu.inverse();
  out.G = 0.5 * (Ginv + Ginv.transpose());  // symmetrize roundoff
  if (order >= 1) {
    for (int i = 0; i < n; ++i) out.dG[i] = -out.G * gj.dG[i] * out.G;
  }
  if (order >= 2) {
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const int p = sym_index(i, j, n);
        out.d2G[p] = out.G * (gj.dG[i] * out.G * gj.dG[j] + gj.dG[j] * out.G * gj.dG[i]) * out.G -
                     out.G * gj.d2G[p] * out.G;
      }
  }
}

void StationaryMetric::h_inverse_jet(const Vec& x, int order, GJet& out) const {
  const int n = dim();
  MetricJet c;
  component_jet(x, order, c);
  out.n = n;
  out.order = order;
  const Mat Hinv = c.h.inverse();
  out.G = 0.5 * (Hinv + Hinv.transpose());
  if (order >= 1)
    for (int i = 0; i < n; ++i) out.dG[i] = -out.G * c.dh[i] * out.G;
  if (order >= 2)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const int p = sym_index(i, j, n);
        out.d2G[p] = out.G * (c.dh[i] * out.G * c.dh[j] + c.dh[j] * out.G * c.dh[i]) * out.G -
                     out.G * c.d2h[p] * out.G;
      }
}

Mat StationaryMetric::metric_at(const Vec& x) const {
  GJet j;
  metric_jet(x, 0, j);
  return j.G;
}

Mat StationaryMetric::inverse_at(const Vec& x) const {
  GJet j;
  inverse_jet(x, 0, j);
  return j.G;
}

BumpMetric::BumpMetric(SpatialDomain dom, bool special_form)
    : dom_(dom), special_form_(special_form) {
  dom_.validate();
  const int n = dom_.n;
  lam_ = ScalarBumpField(n, 1.0);
  omega_.assign(n, ScalarBumpField(n, 0.0));
  h_.assign(sym_count(n), ScalarBumpField(n, 0.0));
  for (int i = 0; i < n; ++i) h_[sym_index(i, i, n)] = ScalarBumpField(n, 1.0);
}

void BumpMetric::component_jet(const Vec& x, int order, MetricJet& out) const {
  const int n = dom_.n;
  out.resize(n, order);
  ScalarJet sj;
  lam_.jet(x, order, sj);
  out.lam = sj.value;
  if (order >= 1) out.dlam = sj.grad;
  if (order >= 2) out.d2lam = sj.hess;
  for (int j = 0; j < n; ++j) {
    const auto& f = omega_[j];
    if (f.empty() && f.base() == 0.0) continue;
    f.jet(x, order, sj);
    out.omega[j] = sj.value;
    if (order >= 1) out.domega.col(j) = sj.grad;
    if (order >= 2)
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) out.d2omega[sym_index(a, b, n)][j] = sj.hess(a, b);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const auto& f = h_[sym_index(i, j, n)];
      if (f.empty()) continue;  // base already in Identity
      f.jet(x, order, sj);
      out.h(i, j) = sj.value;
      out.h(j, i) = sj.value;
      if (order >= 1)
        for (int a = 0; a < n; ++a) {
          out.dh[a](i, j) = sj.grad[a];
          out.dh[a](j, i) = sj.grad[a];
        }
      if (order >= 2)
        for (int a = 0; a < n; ++a)
          for (int b = a; b < n; ++b) {
            const int p = sym_index(a, b, n);
            out.d2h[p](i, j) = sj.hess(a, b);
            out.d2h[p](j, i) = sj.hess(a, b);
          }
    }
}

BumpMetric BumpMetric::rescaled(double factor) const {
  BumpMetric out = *this;
  out.lam_.scale(factor);
  for (auto& f : out.omega_) f.scale(factor);
  for (auto& f : out.h_) f.scale(factor);
  return out;
}

double BumpMetric::min_bump_width() const {
  double w = lam_.min_width();
  for (const auto& f : omega_) w = std::min(w, f.min_width());
  for (const auto& f : h_) w = std::min(w, f.min_width());
  return w;
}

BumpMetric make_bump_metric(const SpatialDomain& dom, const BumpFamilyParams& params) {
  BumpMetric g(dom, params.special_form);
  const int n = dom.n;
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> width_dist(params.min_width, params.max_width);

  auto draw_atom = [&](double amp_scale) {
    BumpAtom a;
    a.width = width_dist(rng) * dom.r_omega;
    a.center = Vec::Zero(n);
    // keep supp(atom) strictly inside Omega
    const double cmax = std::min(params.max_center * dom.r_omega, dom.r_omega * 0.98 - a.width);
    for (int i = 0; i < n; ++i) a.center[i] = unit(rng) * cmax / std::sqrt(double(n));
    a.amplitude = params.eps * amp_scale * (0.25 + 0.25 * std::abs(unit(rng))) *
                  (unit(rng) < 0 ? -1.0 : 1.0);
    return a;
  };

  if (!params.h_only)
    for (int k = 0; k < params.atoms_per_field; ++k) g.lambda_field().add(draw_atom(1.0));
  if (!params.h_only)
    for (int j = params.special_form ? 1 : 0; j < n; ++j)
      for (int k = 0; k < params.atoms_per_field; ++k) g.omega_field(j).add(draw_atom(0.7));
  for (int i = params.special_form ? 1 : 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      for (int k = 0; k < params.atoms_per_field; ++k) g.h_field(i, j).add(draw_atom(0.8));
  return g;
}

BumpMetric make_minkowski(const SpatialDomain& dom) { return BumpMetric(dom, true); }

CovectorClass classify_covector(const StationaryMetric& g, const Vec& z, const Vec& zeta,
                                double null_tol) {
  const int n = g.dim();
  const Vec x = z.segment(1, n);
  const Mat Ginv = g.inverse_at(x);
  const Vec dual = Ginv * zeta;
  const double q = dual.dot(zeta);
  CovectorClass out{};
  if (std::abs(q) <= null_tol * zeta.squaredNorm())
    out.causal = CausalClass::null;
  else
    out.causal = q < 0 ? CausalClass::timelike : CausalClass::spacelike;
  // orientation from the dt-pairing of the dual vector: g(dual, d_t) = zeta_0
  if (zeta[0] < 0)
    out.orientation = Orientation::future;
  else if (zeta[0] > 0)
    out.orientation = Orientation::past;
  else
    out.orientation = Orientation::none;
  return out;
}

std::size_t SampleGrid::size() const {
  std::size_t s = 1;
  for (int i = 0; i < n; ++i) s *= static_cast<std::size_t>(points_per_axis);
  return s;
}

Vec SampleGrid::point(std::size_t flat) const {
  Vec x = Vec::Zero(n);
  const double d = spacing();
  for (int i = n - 1; i >= 0; --i) {
    const std::size_t k = flat % points_per_axis;
    flat /= points_per_axis;
    x[i] = -extent + d * static_cast<double>(k);
  }
  return x;
}

double closeness_seminorm(const BumpMetric& g, int k, const SampleGrid& grid) {
  if (k < 0 || k > 3) fail(Err::config_error, "seminorm order k must be in 0..3");
  const double wmin = g.min_bump_width();
  if (grid.spacing() > wmin)
    fail(Err::grid_too_coarse, "grid spacing exceeds the narrowest bump width");
  const int n = g.dim();

  auto field_max = [&](const ScalarBumpField& f, double base) {
    double m = 0.0;
    ScalarJet sj;
    for (std::size_t p = 0; p < grid.size(); ++p) {
      const Vec x = grid.point(p);
      f.jet(x, k, sj);
      m = std::max(m, std::abs(sj.value - base));
      if (k >= 1) m = std::max(m, sj.grad.cwiseAbs().maxCoeff());
      if (k >= 2) m = std::max(m, sj.hess.cwiseAbs().maxCoeff());
      if (k >= 3)
        for (const auto& v : sj.d3) m = std::max(m, v.cwiseAbs().maxCoeff());
    }
    return m;
  };

  double m = field_max(g.lambda_field(), 1.0);
  for (int j = 0; j < n; ++j) m = std::max(m, field_max(g.omega_field(j), 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      m = std::max(m, field_max(g.h_field(i, j), i == j ? 1.0 : 0.0));
  return m;
}

double special_form_residual(const StationaryMetric& g, const SampleGrid& grid) {
  const int n = g.dim();
  double m = 0.0;
  MetricJet c;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    g.component_jet(grid.point(p), 0, c);
    m = std::max(m, std::abs(c.h(0, 0) - 1.0));
    for (int j = 1; j < n; ++j) m = std::max(m, std::abs(c.h(0, j)));
    m = std::max(m, std::abs(c.omega[0]));
  }
  return m;
}

}  // namespace stt
