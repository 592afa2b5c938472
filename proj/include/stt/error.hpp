#pragma once

#include <stdexcept>
#include <string>

namespace stt {

enum class Err {
  singular,
  grid_too_coarse,
  not_boundary_fixing,
  no_exit,
  grazing_ray,
  no_convergence,
  not_causal,
  nonsmooth_tau,
  degenerate_root,
  fold_detected,
  form_violation,
  scattering_mismatch,
  ill_conditioned,
  singular_direction,
  rank_deficient,
  k_violated,
  config_error,
  io_error,
};

const char* to_string(Err code);

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& msg)
      : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& msg) { throw Error(code, msg); }

}  // namespace stt
