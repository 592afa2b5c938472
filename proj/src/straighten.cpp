#include "stt/straighten.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stt/parallel.hpp"

namespace stt {

namespace {

// Parameter value at which the column through y' first meets Omega; +inf when
// the column misses the ball. psi is the identity before that point.
double omega_entry_coord(const SpatialDomain& dom, const Vec& y_prime) {
  const double r2 = dom.r_omega * dom.r_omega;
  const double q = y_prime.squaredNorm();
  if (q >= r2) return std::numeric_limits<double>::infinity();
  return -std::sqrt(r2 - q);
}

Mat assemble_jacobian(const StationaryMetric& g, const ChartColumnSample& smp) {
  const int n = g.dim();
  MetricJet c;
  g.component_jet(smp.state.x, 0, c);
  Mat J(n, n);
  J.col(0) = c.h.inverse() * smp.state.xi;  // dx/dy^1 = h^-1 xi
  for (int k = 0; k + 1 < n; ++k) J.col(1 + k) = smp.dx_dy.col(k);
  return J;
}

}  // namespace

Straightening::Straightening(const StationaryMetric& g, int cache_N, FlowOptions flow,
                             int workers)
    : g_(&g), flow_(flow) {
  const SpatialDomain& dom = g.domain();
  const int n = dom.n;
  grid_ = UniformGrid{n, cache_N, -dom.rho, dom.rho};

  psi_cache_.assign(n, ScalarLattice(grid_, 0.0));
  jac_cache_.assign(n * n, ScalarLattice(grid_, 0.0));

  const std::size_t columns = grid_.size() / cache_N;
  std::vector<double> col_disp(columns, 0.0), col_det(columns, 1.0);

  par_for(columns, workers, [&](std::size_t cidx) {
    // decode the fixed y' of this column
    int idx[3] = {0, 0, 0};
    std::size_t rem = cidx;
    for (int i = n - 1; i >= 1; --i) {
      idx[i] = static_cast<int>(rem % cache_N);
      rem /= cache_N;
    }
    Vec y_prime = Vec::Zero(n - 1);
    const double d = grid_.spacing();
    for (int i = 0; i + 1 < n; ++i) y_prime[i] = grid_.lo + d * idx[1 + i];

    std::vector<double> params;
    std::vector<int> rows;
    params.reserve(cache_N);
    for (int k = 0; k < cache_N; ++k) {
      const double y1 = grid_.lo + d * k;
      if (y1 >= dom.h_offset) {
        params.push_back(y1 - dom.h_offset);
        rows.push_back(k);
      }
    }
    auto samples = integrate_chart_column(*g_, y_prime, params, flow_);

    double disp = 0.0, dmin = 1.0;
    for (int k = 0; k < cache_N; ++k) {
      int idx2[3] = {k, idx[1], idx[2]};
      const std::size_t flat = grid_.flat(idx2);
      Vec y = Vec::Zero(n);
      y[0] = grid_.lo + d * k;
      for (int i = 0; i + 1 < n; ++i) y[1 + i] = y_prime[i];

      Vec x = y;
      Mat J = Mat::Identity(n, n);
      const auto it = std::find(rows.begin(), rows.end(), k);
      if (it != rows.end()) {
        const auto& smp = samples[static_cast<std::size_t>(it - rows.begin())];
        x = smp.state.x;
        J = assemble_jacobian(*g_, smp);
      }
      for (int c = 0; c < n; ++c) psi_cache_[c].at(flat) = x[c];
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) jac_cache_[r * n + c].at(flat) = J(r, c);
      disp = std::max(disp, (x - y).norm());
      dmin = std::min(dmin, J.determinant());
    }
    col_disp[cidx] = disp;
    col_det[cidx] = dmin;
  });

  for (std::size_t c = 0; c < columns; ++c) {
    max_disp_ = std::max(max_disp_, col_disp[c]);
    min_det_ = std::min(min_det_, col_det[c]);
  }
  if (min_det_ <= 0.0)
    fail(Err::fold_detected, "straightening chart folds (det Dpsi <= 0); eps too large");
}

Straightening::ChartPoint Straightening::chart_point(const Vec& y) const {
  const SpatialDomain& dom = g_->domain();
  const int n = dom.n;
  const Vec y_prime = y.segment(1, n - 1);
  const double entry = omega_entry_coord(dom, y_prime);
  if (y[0] <= entry || y[0] <= dom.h_offset) {
    return {y, Mat::Identity(n, n)};
  }
  auto samples = integrate_chart_column(*g_, y_prime, {y[0] - dom.h_offset}, flow_);
  return {samples[0].state.x, assemble_jacobian(*g_, samples[0])};
}

Vec Straightening::value(const Vec& y) const { return chart_point(y).x; }

Mat Straightening::jacobian(const Vec& y) const { return chart_point(y).J; }

Vec Straightening::value_cached(const Vec& y) const {
  const int n = dim();
  Vec x(n);
  for (int c = 0; c < n; ++c) x[c] = psi_cache_[c].value(y);
  return x;
}

Mat Straightening::jacobian_cached(const Vec& y) const {
  const int n = dim();
  Mat J(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) J(r, c) = jac_cache_[r * n + c].value(y);
  return J;
}

SampledMetric::SampledMetric(SpatialDomain dom, UniformGrid grid) : dom_(dom), grid_(grid) {
  const int n = dom_.n;
  lam_ = ScalarLattice(grid_, 1.0);
  omega_.assign(n, ScalarLattice(grid_, 0.0));
  h_.reserve(sym_count(n));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) h_.push_back(ScalarLattice(grid_, i == j ? 1.0 : 0.0));
}

void SampledMetric::component_jet(const Vec& x, int order, MetricJet& out) const {
  const int n = dom_.n;
  out.resize(n, order);
  double v;
  Vec gr;
  Mat hs;
  lam_.jet(x, order, v, gr, hs);
  out.lam = v;
  if (order >= 1) out.dlam = gr;
  if (order >= 2) out.d2lam = hs;
  for (int j = 0; j < n; ++j) {
    omega_[j].jet(x, order, v, gr, hs);
    out.omega[j] = v;
    if (order >= 1) out.domega.col(j) = gr;
    if (order >= 2)
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) out.d2omega[sym_index(a, b, n)][j] = hs(a, b);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      h_[sym_index(i, j, n)].jet(x, order, v, gr, hs);
      out.h(i, j) = out.h(j, i) = v;
      if (order >= 1)
        for (int a = 0; a < n; ++a) out.dh[a](i, j) = out.dh[a](j, i) = gr[a];
      if (order >= 2)
        for (int a = 0; a < n; ++a)
          for (int b = a; b < n; ++b) {
            const int p = sym_index(a, b, n);
            out.d2h[p](i, j) = out.d2h[p](j, i) = hs(a, b);
          }
    }
}

SampledMetric pullback_full(const StationaryMetric& g, const Straightening& psi,
                            const UniformGrid& grid, int workers, PullbackReport* report) {
  const SpatialDomain& dom = g.domain();
  const int n = dom.n;
  SampledMetric out(dom, grid);

  const int N = grid.N;
  const std::size_t columns = grid.size() / N;
  std::vector<double> col_res(columns, 0.0), col_disp(columns, 0.0);

  par_for(columns, workers, [&](std::size_t cidx) {
    int idx[3] = {0, 0, 0};
    std::size_t rem = cidx;
    for (int i = n - 1; i >= 1; --i) {
      idx[i] = static_cast<int>(rem % N);
      rem /= N;
    }
    Vec y_prime = Vec::Zero(n - 1);
    const double d = grid.spacing();
    for (int i = 0; i + 1 < n; ++i) y_prime[i] = grid.lo + d * idx[1 + i];

    std::vector<double> params;
    std::vector<int> rows;
    for (int k = 0; k < N; ++k) {
      const double y1 = grid.lo + d * k;
      if (y1 >= dom.h_offset) {
        params.push_back(y1 - dom.h_offset);
        rows.push_back(k);
      }
    }
    auto samples = integrate_chart_column(g, y_prime, params, FlowOptions{});

    double res = 0.0, disp = 0.0;
    MetricJet c;
    for (int k = 0; k < N; ++k) {
      int idx2[3] = {k, idx[1], idx[2]};
      const std::size_t flat = grid.flat(idx2);
      Vec y = Vec::Zero(n);
      y[0] = grid.lo + d * k;
      for (int i = 0; i + 1 < n; ++i) y[1 + i] = y_prime[i];

      Vec x = y;
      Mat J = Mat::Identity(n, n);
      const auto it = std::find(rows.begin(), rows.end(), k);
      if (it != rows.end()) {
        const auto& smp = samples[static_cast<std::size_t>(it - rows.begin())];
        x = smp.state.x;
        J = assemble_jacobian(g, smp);
      }
      g.component_jet(x, 0, c);
      const double lam_t = c.lam;
      const Vec omega_t = J.transpose() * c.omega;
      const Mat h_t = J.transpose() * c.h * J;

      out.lam().at(flat) = lam_t;
      for (int j = 0; j < n; ++j) out.omega(j).at(flat) = omega_t[j];
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) out.h(i, j).at(flat) = h_t(i, j);

      res = std::max(res, std::abs(h_t(0, 0) - 1.0));
      for (int j = 1; j < n; ++j) res = std::max(res, std::abs(h_t(0, j)));
      res = std::max(res, std::abs(omega_t[0]));
      disp = std::max(disp, (x - y).norm());
    }
    col_res[cidx] = res;
    col_disp[cidx] = disp;
  });

  if (report) {
    report->special_form_residual = 0.0;
    report->max_displacement = 0.0;
    for (std::size_t c = 0; c < columns; ++c) {
      report->special_form_residual = std::max(report->special_form_residual, col_res[c]);
      report->max_displacement = std::max(report->max_displacement, col_disp[c]);
    }
  }
  return out;
}

Mat TensorDifference::value(const Vec& y) const {
  Mat m = Mat::Zero(1 + n, 1 + n);
  m(0, 0) = m_lam.value(y);
  for (int j = 1; j < n; ++j) {
    const double v = m_omega[j].value(y);
    m(0, 1 + j) = m(1 + j, 0) = v;
  }
  for (int i = 1; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double v = m_h[sym_index(i, j, n)].value(y);
      m(1 + i, 1 + j) = m(1 + j, 1 + i) = v;
    }
  return m;
}

void TensorDifference::jet(const Vec& y, Mat& m, std::array<Mat, 3>& dm) const {
  m = Mat::Zero(1 + n, 1 + n);
  for (int a = 0; a < n; ++a) dm[a] = Mat::Zero(1 + n, 1 + n);
  double v;
  Vec gr;
  Mat hs;
  m_lam.jet(y, 1, v, gr, hs);
  m(0, 0) = v;
  for (int a = 0; a < n; ++a) dm[a](0, 0) = gr[a];
  for (int j = 1; j < n; ++j) {
    m_omega[j].jet(y, 1, v, gr, hs);
    m(0, 1 + j) = m(1 + j, 0) = v;
    for (int a = 0; a < n; ++a) dm[a](0, 1 + j) = dm[a](1 + j, 0) = gr[a];
  }
  for (int i = 1; i < n; ++i)
    for (int j = i; j < n; ++j) {
      m_h[sym_index(i, j, n)].jet(y, 1, v, gr, hs);
      m(1 + i, 1 + j) = m(1 + j, 1 + i) = v;
      for (int a = 0; a < n; ++a) dm[a](1 + i, 1 + j) = dm[a](1 + j, 1 + i) = gr[a];
    }
}

TensorDifference tensor_difference(const StationaryMetric& g1, const StationaryMetric& g2,
                                   const UniformGrid& grid, double form_residual_bound,
                                   int workers) {
  const int n = g1.dim();
  TensorDifference out;
  out.grid = grid;
  out.n = n;
  out.m_lam = ScalarLattice(grid, 0.0);
  out.m_omega.assign(n, ScalarLattice(grid, 0.0));
  out.m_h.assign(sym_count(n), ScalarLattice(grid, 0.0));

  const std::size_t total = grid.size();
  std::vector<double> dropped(total, 0.0), kept(total, 0.0);
  par_for(total, workers, [&](std::size_t f) {
    const Vec y = grid.point(f);
    const Mat m = g1.inverse_at(y) - g2.inverse_at(y);
    double drop = 0.0, keep = 0.0;
    // x^1 row/column must vanish for special-form pairs
    for (int a = 0; a < 1 + n; ++a) drop = std::max(drop, std::abs(m(1, a)));
    out.m_lam.at(f) = m(0, 0);
    keep = std::abs(m(0, 0));
    for (int j = 1; j < n; ++j) {
      out.m_omega[j].at(f) = m(0, 1 + j);
      keep = std::max(keep, std::abs(m(0, 1 + j)));
    }
    for (int i = 1; i < n; ++i)
      for (int j = i; j < n; ++j) {
        out.m_h[sym_index(i, j, n)].at(f) = m(1 + i, 1 + j);
        keep = std::max(keep, std::abs(m(1 + i, 1 + j)));
      }
    dropped[f] = drop;
    kept[f] = keep;
  });
  for (std::size_t f = 0; f < total; ++f) {
    out.zeroed_mass = std::max(out.zeroed_mass, dropped[f]);
    out.max_abs = std::max(out.max_abs, kept[f]);
  }
  if (out.zeroed_mass > 10.0 * form_residual_bound + 1e-15)
    fail(Err::form_violation, "zeroed tensor mass exceeds 10x the special-form residual");
  return out;
}

}  // namespace stt
