#pragma once

#include "eli/ebm/energy.hpp"
#include "eli/numeric/rng.hpp"

namespace eli::ebm {

/// Short-run Langevin chain started at z0:
///   z <- z - (step_size / 2) * clip(dE/dz) + sqrt(step_size) * N(0, I)
/// Returns the state after cfg.steps updates; z0 is not modified. The noise
/// term is skipped when cfg.noise_enabled is false (no draws are consumed).
/// Throws NumericError naming the step when an energy turns non-finite.
Matrix langevin_sample(const EnergyFunction& energy, const Matrix& z0, const LangevinConfig& cfg,
                       numeric::Rng& rng);

}  // namespace eli::ebm
