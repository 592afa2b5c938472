// Compares the OpenMP kernels against their single-threaded reference runs and
// checks that the outputs agree bit for bit (each work item owns its slot and
// reductions are order-fixed).

#include <omp.h>

#include <chrono>
#include <cstdio>

#include "stt/acceptance.hpp"
#include "stt/boundary.hpp"
#include "stt/fourier.hpp"
#include "stt/lattice.hpp"

using namespace stt;

namespace {

double now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <class F>
double timed(const char* name, int workers, F&& fn) {
  const double t0 = now();
  fn();
  const double dt = now() - t0;
  std::printf("  %-28s workers=%-2d %8.3f s\n", name, workers, dt);
  return dt;
}

}  // namespace

int main(int argc, char** argv) {
  int threads = omp_get_max_threads();
  if (argc > 1) threads = std::atoi(argv[1]);
  ExperimentConfig cfg;
  std::printf("benchmark: serial reference vs OpenMP (%d threads)\n", threads);

  const TestPair pair = make_test_pair(cfg);
  ShootOptions so;
  so.flow = cfg.flow_options();
  TauTableSpec spec;
  spec.points = 20;

  std::vector<TauSample> t_serial, t_par;
  const double ts = timed("tau table (serial)", 1, [&] {
    t_serial = tau_table(*pair.g1, spec, 1, so);
  });
  const double tp = timed("tau table (omp)", threads, [&] {
    t_par = tau_table(*pair.g1, spec, threads, so);
  });
  bool identical = t_serial.size() == t_par.size();
  for (std::size_t k = 0; identical && k < t_serial.size(); ++k)
    identical = t_serial[k].tau == t_par[k].tau && t_serial[k].status == t_par[k].status;
  std::printf("  tau table: speedup %.2fx, bit-identical: %s\n", ts / tp,
              identical ? "yes" : "NO");

  const UniformGrid grid{2, 64, -cfg.domain.rho, cfg.domain.rho};
  SyntheticSpec sspec;
  const SyntheticTensor m = make_synthetic_tensor(cfg.domain, grid, sspec);
  ATransformOptions opt;
  opt.p = Vec::Ones(1);
  opt.y_points = 48;
  opt.s_step = 0.04;
  opt.eta_stride = 2;

  ASpectrum a_serial, a_par;
  opt.workers = 1;
  const double as = timed("A transform (serial)", 1, [&] {
    a_serial = transform_A_synthetic(m, cfg.domain, grid, opt);
  });
  opt.workers = threads;
  const double ap = timed("A transform (omp)", threads, [&] {
    a_par = transform_A_synthetic(m, cfg.domain, grid, opt);
  });
  identical = a_serial.eta.size() == a_par.eta.size();
  for (std::size_t k = 0; identical && k < a_serial.eta.size(); ++k)
    identical = a_serial.eta[k] == a_par.eta[k] &&
                (a_serial.value[k] - a_par.value[k]).cwiseAbs().maxCoeff() == 0.0;
  std::printf("  A transform: speedup %.2fx, bit-identical: %s\n", as / ap,
              identical ? "yes" : "NO");

  // direct-sum serial reference vs the separable sweep
  const UniformGrid dgrid{2, 24, -1.2, 1.2};
  std::vector<double> field(dgrid.size());
  for (std::size_t k = 0; k < field.size(); ++k) {
    const Vec x = dgrid.point(k);
    field[k] = std::exp(-2.0 * x.squaredNorm());
  }
  std::vector<cplx> direct(dgrid.size());
  const double ds = timed("DFT (direct serial)", 1, [&] {
    for (std::size_t f = 0; f < dgrid.size(); ++f) {
      const Vec th = dgrid.freq(f);
      cplx acc(0, 0);
      for (std::size_t k = 0; k < dgrid.size(); ++k)
        acc += std::polar(1.0, -th.dot(dgrid.point(k))) * field[k];
      direct[f] = acc * std::pow(dgrid.spacing(), 2);
    }
  });
  std::vector<cplx> sweep;
  const double dp = timed("DFT (separable omp)", threads, [&] {
    sweep = dft_plain(dgrid, field, threads);
  });
  double gap = 0.0;
  for (std::size_t f = 0; f < dgrid.size(); ++f)
    gap = std::max(gap, std::abs(direct[f] - sweep[f]));
  std::printf("  DFT: speedup %.2fx, max |direct - separable| = %.3e\n", ds / dp, gap);
  return 0;
}
