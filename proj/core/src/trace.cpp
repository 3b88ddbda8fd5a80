#include "pspo/trace.hpp"

namespace pspo {

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::running: return "running";
    case StopReason::gradient_norm: return "gradient_norm";
    case StopReason::step_size: return "step_size";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::objective_failure: return "objective_failure";
  }
  return "unknown";
}

}  // namespace pspo
