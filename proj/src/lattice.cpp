#include "stt/lattice.hpp"

#include <cmath>

#include "stt/error.hpp"
#include "stt/parallel.hpp"

namespace stt {

Vec UniformGrid::point(std::size_t flat) const {
  Vec x = Vec::Zero(n);
  const double d = spacing();
  for (int i = n - 1; i >= 0; --i) {
    x[i] = lo + d * static_cast<double>(flat % N);
    flat /= N;
  }
  return x;
}

std::size_t UniformGrid::flat(const int* idx) const {
  std::size_t f = 0;
  for (int i = 0; i < n; ++i) f = f * N + static_cast<std::size_t>(idx[i]);
  return f;
}

Vec UniformGrid::freq(std::size_t flat) const {
  Vec th = Vec::Zero(n);
  const double dth = freq_step();
  for (int i = n - 1; i >= 0; --i) {
    int k = static_cast<int>(flat % N);
    if (k >= N / 2) k -= N;
    th[i] = dth * k;
    flat /= N;
  }
  return th;
}

ScalarLattice::ScalarLattice(UniformGrid grid, double outside)
    : grid_(grid), outside_(outside), values_(grid.size(), outside) {}

void ScalarLattice::fill(const std::function<double(const Vec&)>& f) {
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] = f(grid_.point(k));
}

namespace {

// Quintic Lagrange basis on nodes {0..5}: coefficient matrix C with
// L_k(t) = sum_p C(k,p) t^p.
const Eigen::Matrix<double, 6, 6>& lagrange_coeffs() {
  static const Eigen::Matrix<double, 6, 6> C = [] {
    Eigen::Matrix<double, 6, 6> V;
    for (int k = 0; k < 6; ++k)
      for (int p = 0; p < 6; ++p) V(k, p) = std::pow(double(k), p);
    // row k of V^-T gives the coefficients of L_k
    return Eigen::Matrix<double, 6, 6>(V.inverse().transpose());
  }();
  return C;
}

struct AxisWeights {
  int base = 0;          // first stencil node index
  double w[6], dw[6], d2w[6];
};

void axis_weights(const UniformGrid& g, double x, int order, AxisWeights& out) {
  const double d = g.spacing();
  const double u = (x - g.lo) / d;
  int base = static_cast<int>(std::floor(u)) - 2;
  base = std::max(0, std::min(g.N - 6, base));
  const double t = u - base;
  (void)order;
  const auto& C = lagrange_coeffs();
  double tp[6];  // t^p
  tp[0] = 1.0;
  for (int p = 1; p < 6; ++p) tp[p] = tp[p - 1] * t;
  for (int k = 0; k < 6; ++k) {
    double v = 0.0, dv = 0.0, d2v = 0.0;
    for (int p = 0; p < 6; ++p) v += C(k, p) * tp[p];
    for (int p = 1; p < 6; ++p) dv += C(k, p) * p * tp[p - 1];
    for (int p = 2; p < 6; ++p) d2v += C(k, p) * p * (p - 1) * tp[p - 2];
    out.w[k] = v;
    out.dw[k] = dv / d;
    out.d2w[k] = d2v / (d * d);
  }
  out.base = base;
}

}  // namespace

double ScalarLattice::value(const Vec& x) const {
  double v;
  Vec g;
  Mat h;
  jet(x, 0, v, g, h);
  return v;
}

void ScalarLattice::jet(const Vec& x, int order, double& value, Vec& grad, Mat& hess) const {
  const int n = grid_.n;
  if (order >= 1) grad = Vec::Zero(n);
  if (order >= 2) hess = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (x[i] < grid_.lo || x[i] > grid_.hi) {
      value = outside_;
      return;
    }
  }
  AxisWeights aw[3];
  for (int i = 0; i < n; ++i) axis_weights(grid_, x[i], order, aw[i]);

  value = 0.0;
  int idx[3] = {0, 0, 0};
  const int count = n == 2 ? 36 : 216;
  for (int s = 0; s < count; ++s) {
    int rem = s;
    double w = 1.0;
    for (int i = 0; i < n; ++i) {
      idx[i] = aw[i].base + rem % 6;
      rem /= 6;
    }
    const double fv = values_[grid_.flat(idx)];
    double prod[3];
    for (int i = 0; i < n; ++i) {
      prod[i] = aw[i].w[idx[i] - aw[i].base];
      w *= prod[i];
    }
    value += fv * w;
    if (order >= 1) {
      for (int i = 0; i < n; ++i) {
        double gi = aw[i].dw[idx[i] - aw[i].base];
        for (int j = 0; j < n; ++j)
          if (j != i) gi *= prod[j];
        grad[i] += fv * gi;
      }
    }
    if (order >= 2) {
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          double hij;
          if (i == j) {
            hij = aw[i].d2w[idx[i] - aw[i].base];
            for (int k = 0; k < n; ++k)
              if (k != i) hij *= prod[k];
          } else {
            hij = aw[i].dw[idx[i] - aw[i].base] * aw[j].dw[idx[j] - aw[j].base];
            for (int k = 0; k < n; ++k)
              if (k != i && k != j) hij *= prod[k];
          }
          hess(i, j) += fv * hij;
          if (i != j) hess(j, i) += fv * hij;
        }
    }
  }
}

namespace {

// Separable transform: apply the N x N phase matrix along each axis in turn.
std::vector<cplx> dft_axis_sweep(const UniformGrid& grid, std::vector<cplx> data, int workers) {
  const int n = grid.n;
  const int N = grid.N;
  const double d = grid.spacing();

  // phase(k, j) = exp(-i theta_k x_j) with x_j = lo + j d, theta_k centered
  std::vector<cplx> phase(static_cast<std::size_t>(N) * N);
  for (int k = 0; k < N; ++k) {
    int kk = k >= N / 2 ? k - N : k;
    const double th = grid.freq_step() * kk;
    for (int j = 0; j < N; ++j)
      phase[static_cast<std::size_t>(k) * N + j] = std::polar(1.0, -th * (grid.lo + j * d));
  }
  // note: freq() maps flat index k -> centered theta with the same wrap rule
  // used here (k >= N/2 means negative), so data stays index-aligned.

  std::vector<cplx> tmp(data.size());
  std::size_t stride = 1;
  for (int axis = n - 1; axis >= 0; --axis) {
    const std::size_t outer = data.size() / (static_cast<std::size_t>(N) * stride);
    par_for(outer * stride, workers, [&](std::size_t q) {
      const std::size_t o = q / stride, inner = q % stride;
      const std::size_t base = o * N * stride + inner;
      for (int k = 0; k < N; ++k) {
        cplx acc(0.0, 0.0);
        const cplx* ph = &phase[static_cast<std::size_t>(k) * N];
        for (int j = 0; j < N; ++j) acc += ph[j] * data[base + static_cast<std::size_t>(j) * stride];
        tmp[base + static_cast<std::size_t>(k) * stride] = acc;
      }
    });
    std::swap(data, tmp);
    stride *= N;
  }
  const double cell = std::pow(d, n);
  for (auto& v : data) v *= cell;
  return data;
}

}  // namespace

std::vector<cplx> dft_plain_complex(const UniformGrid& grid, const std::vector<cplx>& field,
                                    int workers) {
  return dft_axis_sweep(grid, field, workers);
}

std::vector<cplx> dft_plain(const UniformGrid& grid, const std::vector<double>& field,
                            int workers) {
  std::vector<cplx> data(field.begin(), field.end());
  return dft_axis_sweep(grid, std::move(data), workers);
}

std::vector<cplx> dft_plain_serial(const UniformGrid& grid, const std::vector<double>& field) {
  std::vector<cplx> data(field.begin(), field.end());
  return dft_axis_sweep(grid, std::move(data), 1);
}

double l2_norm(const UniformGrid& grid, const std::vector<double>& field) {
  std::vector<double> sq(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) sq[i] = field[i] * field[i];
  return std::sqrt(pairwise_sum(sq) * std::pow(grid.spacing(), grid.n));
}

double spectral_l2_norm(const UniformGrid& grid, const std::vector<cplx>& fhat) {
  std::vector<double> sq(fhat.size());
  for (std::size_t i = 0; i < fhat.size(); ++i) sq[i] = std::norm(fhat[i]);
  const double dth = grid.freq_step();
  return std::sqrt(pairwise_sum(sq) * std::pow(dth / (2.0 * M_PI), grid.n));
}

}  // namespace stt
