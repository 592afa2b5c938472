#pragma once

#include <array>
#include <vector>

#include "stt/lattice.hpp"
#include "stt/metric.hpp"
#include "stt/straighten.hpp"

namespace stt {

using CVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1, 0, 4, 1>;

// ----- directions and cutoffs ------------------------------------------------

// xi(eta, p): unit vector orthogonal to eta,
//   xi_1 = -eta'.p / sqrt(|eta'.p|^2 + eta_1^2),  xi' = eta_1 p / sqrt(...).
// eta has size n (eta_1 along the x^1 axis), p is a unit vector of size n-1.
Vec xi_from_eta_p(const Vec& eta, const Vec& p);

// psi_p(eta) = eta_1 / sqrt(|eta'.p|^2 + eta_1^2), homogeneous of order 0.
double psi_p(const Vec& eta, const Vec& p);

struct CutoffSpec {
  enum class Kind { lorentzian, riemannian };
  Kind kind = Kind::lorentzian;
  double mu = 0.1;
};

// Smooth order-0 homogeneous cutoff: 0 below ratio mu/2, 1 above mu, quintic
// smoothstep in between. The lorentzian ratio is |eta_1|/|eta|; the riemannian
// one (chi_p) is (|eta'.p| + |eta_1|)/|eta|.
double cutoff(const Vec& eta, const CutoffSpec& spec, const Vec* p = nullptr);

// ----- synthetic tensor fields (eps = 0 experiments) -------------------------

struct WaveMode {
  double amp = 0.0;
  Vec q;  // wavevector
  double phase = 0.0;
};

// window(|x|) * sum_k amp_k cos(q_k . x + phase_k); the radial window is 1
// inside r_plateau and 0 beyond r_support (quintic smoothstep in between).
class WindowedWaves {
 public:
  WindowedWaves() = default;
  WindowedWaves(int n, double r_plateau, double r_support)
      : n_(n), r0_(r_plateau), r1_(r_support) {}
  void add(const WaveMode& m) { modes_.push_back(m); }
  bool empty() const { return modes_.empty(); }
  double value(const Vec& x) const;
  Vec grad(const Vec& x) const;
  const std::vector<WaveMode>& modes() const { return modes_; }
  double r_support() const { return r1_; }
  double window(double r) const;
  double window_deriv(double r) const;

 private:
  int n_ = 0;
  double r0_ = 0.5, r1_ = 0.9;
  std::vector<WaveMode> modes_;
};

// A synthetic tensor difference in the special block form: the x^1 row and
// column vanish identically.
struct SyntheticTensor {
  int n = 2;
  WindowedWaves lam;                  // m^00
  std::vector<WindowedWaves> omega;   // index j = 0..n-2 for the x^{j+2} slot
  std::vector<WindowedWaves> h;       // packed sym over the x^2..x^n block
  void jet(const Vec& x, Mat& m, std::array<Mat, 3>& dm) const;

  double lam_at(const Vec& x) const { return lam.value(x); }
  double omega_p_at(const Vec& x, const Vec& p) const;   // m_omega . p
  double h_pp_at(const Vec& x, const Vec& p) const;      // m_h p . p
};

struct SyntheticSpec {
  int modes_per_field = 3;
  double q_max_factor = 0.25;  // highest mode <= q_max_factor * N * freq_step
  std::uint64_t seed = 7;
  double amp = 1.0;
  bool lam_only = false;
  double r_plateau_factor = 0.55;  // of r_omega
  double r_support_factor = 0.85;
};

SyntheticTensor make_synthetic_tensor(const SpatialDomain& dom, const UniformGrid& grid,
                                      const SyntheticSpec& spec);

// ----- the A transform -------------------------------------------------------

struct ATransformOptions {
  double rho_param = -1.05;  // the fixed rho in zeta0 = (rho, xi)
  Vec p;                     // unit vector in S^{n-2}
  CutoffSpec chi;
  int y_points = 128;        // rays per (n-1)-dim hyperplane axis
  double s_step = 0.01;      // Simpson step along rays
  bool with_B = true;        // include the B-block terms (pair transform)
  int b_samples = 33;        // Simpson nodes for the B-part
  int eta_stride = 1;        // keep every k-th lattice frequency per axis
  int workers = 0;
  FlowOptions flow;
};

// Sparse spectrum: values at the frequency-lattice points kept by the cutoff
// support and the stride. Each value carries 1+n complex components.
struct ASpectrum {
  UniformGrid grid;
  std::vector<std::size_t> eta;  // flat indices into grid's frequency lattice
  std::vector<CVec> value;
  std::vector<int> status;  // 0 = ok, 1 = ray failure

  double max_abs() const;
};

// Ray-quadrature route with straight (eps = 0) rays and no B terms.
ASpectrum transform_A_synthetic(const SyntheticTensor& m, const SpatialDomain& dom,
                                const UniformGrid& grid, const ATransformOptions& opt);

// Ray route for a metric pair: traces the g1 bicharacteristics, takes
// m = g1^-1 - g2^-1 along them, and optionally the B terms from the g2
// variational flow.
ASpectrum transform_A_pair(const StationaryMetric& g1, const StationaryMetric& g2,
                           const UniformGrid& grid, const ATransformOptions& opt);

// Projection-slice oracle: returns the same spectrum assembled from the plain
// n-dimensional DFTs of the tensor components,
//   A(eta) = chi(eta) i eta (rho^2 mhat_lam + 2 rho psi_p mhat_{omega.p}
//            + psi_p^2 mhat_{h pp}).
ASpectrum oracle_A_spectrum(const SyntheticTensor& m, const SpatialDomain& dom,
                            const UniformGrid& grid, const ATransformOptions& opt);

// Deterministic orthonormal basis of the hyperplane orthogonal to xi.
std::vector<Vec> xi_perp_basis(const Vec& xi);

// Shared assembly used by the transform routes: evaluates ray_integral once
// per ray of each direction group (the cutoff and xi are constant per group by
// order-0 homogeneity) and projects the integrals on each member frequency.
ASpectrum assemble_direction_spectrum(
    const SpatialDomain& dom, const UniformGrid& grid, const ATransformOptions& opt,
    const std::function<Vec(const Vec& xi, const Vec& y, bool& failed)>& ray_integral);

// Relative L2 gap over the common support, sqrt(sum |a-b|^2 / sum |b|^2).
double relative_l2_gap(const ASpectrum& a, const ASpectrum& b);

// Parity/rho elimination (pure algebra on spectra at (rho_i, +-p)).
struct AComponents {
  ASpectrum A1, A2, A3;
};
AComponents extract_components(const ASpectrum& r1p, const ASpectrum& r1m, const ASpectrum& r2p,
                               const ASpectrum& r2m, double rho1, double rho2);

// ----- phase change of variables ---------------------------------------------

struct PhaseChange {
  Vec theta;   // theta(x, y, eta)
  double J2;   // det(d theta / d eta)
  double J1;   // Jacobian of x_delta -> x at x
};

// theta(x,y,eta) = int_0^1 grad phi(y + t(x-y), eta) dt with
// phi(x, eta) = eta . x_delta(x); x_delta is inverted by Newton on the ray
// family (y, s) -> x_{g1}(s). theta is linear in eta by construction.
PhaseChange phase_change_of_variables(const StationaryMetric& g1, const Vec& x, const Vec& y,
                                      const Vec& eta, const Vec& p, double rho_param,
                                      const FlowOptions& opts = {});

// ----- FIO norm experiment (the L2 bound for oscillatory kernels) ------------

// Separable amplitude a(x,y,xi) = prod_i gx_i(x_i) * prod_i gy_i(y_i) * u(xi)
// built from Gaussians, whose derivative integrals have closed Hermite forms;
// |u| <= 1 so the sup over xi is immediate.
struct FioAmplitude {
  struct Gauss {
    double center = 0.0, sigma = 0.3, scale = 1.0;
  };
  std::vector<Gauss> gx, gy;  // one per axis
  bool xi_modulated = false;  // multiply by the smooth order-0 factor (xi_1/|xi|)^2

  double value(const Vec& x, const Vec& y, const Vec& xi) const;
  // integral over t of |d^k/dt^k gauss|
  static double abs_deriv_integral(const Gauss& g, int k);
};

struct FioResult {
  double norm_P = 0.0;  // measured L2 -> L2 norm of the discretized operator
  double M = 0.0;       // derivative-sum bound from the hypothesis
  double ratio = 0.0;   // norm_P / M
  int iterations = 0;
};

FioResult fio_norm_experiment(const FioAmplitude& a, const UniformGrid& pos_grid,
                              int workers = 0);

// Dense kernel of the discretized operator (for the SVD cross-check in tests).
std::vector<cplx> fio_kernel(const FioAmplitude& a, const UniformGrid& pos_grid, int workers = 0);

// ----- cone estimate and contraction ledger ----------------------------------

struct ConeResult {
  std::vector<double> mu;
  std::vector<double> ratio;  // ||theta mhat||_{cone mu} / ||grad m||
  double h2_over_h1 = 0.0;
  double grad_norm = 0.0;
  double best_mu_attaining_third = 0.0;  // largest mu with ratio <= 1/3 (0 if none)
};

// Scalar-field version of the cone estimate: spectral band norms over the
// lattice cone {|theta_1|/|theta| <= mu}. Throws KViolated when the discrete
// H2/H1 precondition fails.
ConeResult cone_estimate_experiment(const std::vector<double>& field, const UniformGrid& grid,
                                    const std::vector<double>& mu_list, double K,
                                    int workers = 0);

struct ContractionReport {
  double eps = 0.0;
  double mu = 0.0;  // eps^{1/8}
  double grad_m_norm = 0.0;
  double m_max = 0.0;
  double high_lam = 0.0, high_omega = 0.0, high_h = 0.0;  // region norms, |theta_1|/|theta| > mu
  double cone_norm = 0.0;                                  // complementary region, all components
  double ratio_lam = 0.0, ratio_omega = 0.0, ratio_h = 0.0;
  double combined_lhs = 0.0;  // high + cone (the (1/3 + 1/3) ledger)
  bool pass = false;
};

// Region-restricted spectral norms of the straightened tensor difference
// against the sqrt(eps)/mu^k reference scales; pass means every measured ratio
// is below `slack`.
ContractionReport contraction_diagnostic(const TensorDifference& m, double eps, double slack,
                                         double floor_abs, int workers = 0);

// Discrete Sobolev norm via the spectrum: || (1+|theta|^2)^{s/2} fhat ||.
double sobolev_norm(const UniformGrid& grid, const std::vector<cplx>& fhat, double s);

}  // namespace stt
