#include "eli/ebm/langevin.hpp"

#include <algorithm>
#include <cmath>

#include "eli/numeric/errors.hpp"

namespace eli::ebm {

Matrix langevin_sample(const EnergyFunction& energy, const Matrix& z0, const LangevinConfig& cfg,
                       numeric::Rng& rng) {
  cfg.validate();
  if (z0.cols() != energy.input_dim()) {
    throw ShapeError("langevin_sample: latent dim " + std::to_string(z0.cols()) +
                     " does not match energy dim " + std::to_string(energy.input_dim()));
  }
  if (!numeric::all_finite(z0)) throw NumericError("langevin_sample: non-finite start state");

  const double half_step = 0.5 * cfg.step_size;
  const double noise_scale = std::sqrt(cfg.step_size);
  Matrix z = z0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    EnergyEvaluation eval = energy.evaluate(z);
    if (!numeric::all_finite(eval.energies) || !numeric::all_finite(eval.grad)) {
      throw NumericError("langevin_sample: non-finite energy at step " + std::to_string(step));
    }
    auto grad = eval.grad.data();
    if (cfg.grad_clip) {
      const double c = *cfg.grad_clip;
      for (double& g : grad) g = std::clamp(g, -c, c);
    }
    auto zs = z.data();
    for (std::size_t i = 0; i < zs.size(); ++i) zs[i] -= half_step * grad[i];
    if (cfg.noise_enabled) {
      for (double& v : zs) v += noise_scale * rng.normal();
    }
  }
  return z;
}

}  // namespace eli::ebm
