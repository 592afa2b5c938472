#pragma once

#include <Eigen/Dense>

// Index conventions used throughout:
//   spacetime index 0..n   (0 = time slot), stored in vectors of size 1+n
//   spatial index   1..n   maps to array position 0..n-1 in spatial vectors
// The x^1 axis is distinguished: it is the normal direction of the reference
// hyperplane H and the axis of the special block form.

namespace stt {

// Stack-allocated dynamic-size vectors/matrices, capacity up to spacetime
// dimension 4 (n <= 3) and phase-space dimension 8.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;
using FlowVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 8, 1>;
using FlowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8>;

// A point of phase space: spacetime point z = (t, x) and covector zeta,
// both of size 1+n.
struct PhaseState {
  Vec z;
  Vec zeta;

  int spacetime_dim() const { return static_cast<int>(z.size()); }
  double t() const { return z[0]; }
  Vec x() const { return z.segment(1, z.size() - 1); }
};

inline Mat minkowski(int n) {
  Mat g = Mat::Identity(1 + n, 1 + n);
  g(0, 0) = -1.0;
  return g;
}

// delta * zeta = (-zeta_0, zeta_1, ..., zeta_n)
inline Vec mink_flip(const Vec& zeta) {
  Vec out = zeta;
  out[0] = -out[0];
  return out;
}

// Number of unordered index pairs (i,j), i<=j, in dimension n.
inline int sym_count(int n) { return n * (n + 1) / 2; }

// Position of the pair (i,j), 0 <= i <= j < n, in packed symmetric storage.
inline int sym_index(int i, int j, int n) {
  if (i > j) std::swap(i, j);
  return i * n - i * (i - 1) / 2 + (j - i);
}

}  // namespace stt
