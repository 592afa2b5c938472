#include "stt/error.hpp"

namespace stt {

const char* to_string(Err code) {
  switch (code) {
    case Err::singular: return "Singular";
    case Err::grid_too_coarse: return "GridTooCoarse";
    case Err::not_boundary_fixing: return "NotBoundaryFixing";
    case Err::no_exit: return "NoExit";
    case Err::grazing_ray: return "GrazingRay";
    case Err::no_convergence: return "NoConvergence";
    case Err::not_causal: return "NotCausal";
    case Err::nonsmooth_tau: return "NonsmoothTau";
    case Err::degenerate_root: return "DegenerateRoot";
    case Err::fold_detected: return "FoldDetected";
    case Err::form_violation: return "FormViolation";
    case Err::scattering_mismatch: return "ScatteringMismatch";
    case Err::ill_conditioned: return "IllConditioned";
    case Err::singular_direction: return "SingularDirection";
    case Err::rank_deficient: return "RankDeficient";
    case Err::k_violated: return "KViolated";
    case Err::config_error: return "ConfigError";
    case Err::io_error: return "IoError";
  }
  return "UnknownError";
}

}  // namespace stt
