#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "eli/numeric/mlp.hpp"

namespace eli::cli {

// Stand-in for numeric::mlp_backward; lets a test build substitute a broken one.
using BackwardFn = std::function<numeric::MlpGradients(
    const numeric::MlpParams&, const numeric::ForwardCache&, const numeric::Matrix&)>;

struct GradcheckConfig {
  std::uint64_t seed = 0;
  std::size_t networks = 20;
  std::size_t probes_per_network = 5;
  std::size_t probe_batch = 2;
  double step = 1e-5;         // central difference half-width
  double tolerance = 1e-5;    // on the max relative error
  double kink_margin = 1e-3;  // probes this close to a relu kink are redrawn
};

struct GradcheckResult {
  std::size_t probes = 0;
  std::size_t redrawn = 0;  // probes replaced for sitting near a kink
  std::size_t entries = 0;  // gradient entries compared
  double max_input_error = 0.0;
  double max_param_error = 0.0;

  double max_error() const { return max_input_error > max_param_error ? max_input_error : max_param_error; }
};

/// Random MLPs with depth 1-3 and a relu/identity mix; per probe, compares
/// the analytic input and parameter gradients of sum(u .* f(x)) for a random
/// upstream u against central differences.
GradcheckResult run_gradcheck(const GradcheckConfig& cfg, const BackwardFn& backward = {});

}  // namespace eli::cli
