#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stt/flow.hpp"
#include "stt/metric.hpp"

namespace stt {

// Everything an experiment run needs, loaded from a single JSON tree with
// exhaustive validation (unknown keys and bad types are errors with the full
// key path in the message).
struct ExperimentConfig {
  SpatialDomain domain;

  struct Metrics {
    double eps = 1e-2;
    int atoms_per_field = 2;
    std::uint64_t seed = 1;
    double diffeo_amplitude = 0.02;
    std::uint64_t diffeo_seed = 11;
  } metrics;

  struct Flow {
    double step_factor = 1e-3;   // step = step_factor * rho
    double budget_factor = 40.0; // param budget = budget_factor * rho
  } flow;

  struct Tau {
    int points = 32;
    double time_factor = 1.25;
    double T_factor = 4.0;  // T = T_factor * rho
  } tau;

  struct Rays {
    double rho_param = -1.05;
    int count = 50;
  } rays;

  struct Fourier {
    int N = 64;
    double mu = 0.1;
    double rho1 = -1.05;
    double rho2 = -1.10;
    int y_points = 128;
    double s_step = 0.01;
    int eta_stride = 1;
  } fourier;

  struct Cone {
    int N = 256;
    double L = 8.0;
    std::vector<double> mu_list = {0.4, 0.3, 0.2, 0.1, 0.05};
    double K = 5.0;
  } cone;

  struct Contraction {
    double slack = 1.0;
    double floor_abs = 1e-6;
    int chart_N = 96;
    int lattice_N = 64;
  } contraction;

  std::string experiment = "full";
  std::uint64_t seed = 1;
  int workers = 0;
  std::string out_dir = "out";

  static ExperimentConfig load(const std::string& path);
  static ExperimentConfig parse(const std::string& json_text);

  // Canonical serialization (sorted keys, full precision) and its FNV-1a hash.
  std::string canonical() const;
  std::string hash_hex() const;

  FlowOptions flow_options() const;
  void validate() const;
};

}  // namespace stt
