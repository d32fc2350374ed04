#include "eli/aligner/align.hpp"

#include <cmath>

#include "eli/numeric/errors.hpp"

namespace eli::aligner {

namespace {

void check_input(const ebm::EnergyFunction& energy, const Matrix& z) {
  if (z.cols() != energy.input_dim()) {
    throw ShapeError("align: latent dim " + std::to_string(z.cols()) +
                     " does not match energy dim " + std::to_string(energy.input_dim()));
  }
}

void check_gradient(const Matrix& grad, std::size_t step) {
  for (std::size_t r = 0; r < grad.rows(); ++r) {
    if (!numeric::all_finite(grad.row(r))) {
      throw NumericError("align: non-finite gradient at step " + std::to_string(step) + ", row " +
                         std::to_string(r));
    }
  }
}

void descend(Matrix& z, const Matrix& grad, double lr) {
  auto zs = z.data();
  const auto g = grad.data();
  for (std::size_t i = 0; i < zs.size(); ++i) zs[i] -= lr * g[i];
}

}  // namespace

std::string to_string(AlignSpace s) { return s == AlignSpace::logit ? "logit" : "latent"; }

AlignSpace parse_align_space(const std::string& s) {
  if (s == "latent") return AlignSpace::latent;
  if (s == "logit") return AlignSpace::logit;
  throw ConfigError("unknown align space '" + s + "' (expected latent|logit)");
}

void AlignConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("align learning_rate must be positive");
}

Matrix align_latents(const ebm::EnergyFunction& energy, const Matrix& z, const AlignConfig& cfg) {
  cfg.validate();
  check_input(energy, z);
  Matrix out = z;
  for (std::size_t step = 0; step < cfg.l_steps; ++step) {
    const ebm::EnergyEvaluation eval = energy.evaluate(out);
    check_gradient(eval.grad, step);
    descend(out, eval.grad, cfg.learning_rate);
  }
  return out;
}

Matrix align_latents(const ebm::EnergyModel& model, const Matrix& z, const AlignConfig& cfg) {
  return align_latents(ebm::energy_surface(model, cfg.use_ema), z, cfg);
}

AlignTrace align_energy_trace(const ebm::EnergyFunction& energy, const Matrix& z,
                              const AlignConfig& cfg, bool keep_steps) {
  cfg.validate();
  check_input(energy, z);
  AlignTrace result{z, Matrix(z.rows(), cfg.l_steps + 1), {}};
  if (keep_steps) result.steps.reserve(cfg.l_steps);
  for (std::size_t step = 0;; ++step) {
    const ebm::EnergyEvaluation eval = energy.evaluate(result.aligned);
    for (std::size_t r = 0; r < z.rows(); ++r) result.trace(r, step) = eval.energies[r];
    if (step == cfg.l_steps) break;
    check_gradient(eval.grad, step);
    descend(result.aligned, eval.grad, cfg.learning_rate);
    if (keep_steps) result.steps.push_back(result.aligned);
  }
  return result;
}

AlignTrace align_energy_trace(const ebm::EnergyModel& model, const Matrix& z,
                              const AlignConfig& cfg, bool keep_steps) {
  return align_energy_trace(ebm::energy_surface(model, cfg.use_ema), z, cfg, keep_steps);
}

Matrix per_dimension_delta(const Matrix& z_before, std::span<const Matrix> z_steps) {
  const std::size_t dim = z_before.cols();
  Matrix delta(dim, z_steps.size());
  for (std::size_t i = 0; i < z_steps.size(); ++i) {
    const Matrix& zi = z_steps[i];
    if (zi.rows() != z_before.rows() || zi.cols() != dim) {
      throw ShapeError("per_dimension_delta: step " + std::to_string(i) + " is " +
                       zi.shape_string() + ", expected " + z_before.shape_string());
    }
    if (z_before.rows() == 0) continue;
    for (std::size_t r = 0; r < zi.rows(); ++r) {
      const auto now = zi.row(r);
      const auto start = z_before.row(r);
      for (std::size_t d = 0; d < dim; ++d) delta(d, i) += now[d] - start[d];
    }
    for (std::size_t d = 0; d < dim; ++d) delta(d, i) /= static_cast<double>(z_before.rows());
  }
  return delta;
}

}  // namespace eli::aligner
