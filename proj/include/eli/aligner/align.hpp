#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eli/ebm/energy.hpp"

namespace eli::aligner {

using numeric::Matrix;

// Which representation the energy model was trained on and is applied to.
enum class AlignSpace { latent, logit };

std::string to_string(AlignSpace s);
AlignSpace parse_align_space(const std::string& s);

struct AlignConfig {
  std::size_t l_steps = 30;
  double learning_rate = 0.01;
  bool use_ema = true;
  AlignSpace space = AlignSpace::latent;

  void validate() const;
  friend bool operator==(const AlignConfig&, const AlignConfig&) = default;
};

/// Noise-free energy descent: z <- z - learning_rate * dE/dz, l_steps times.
/// The input is not modified. Throws NumericError naming the step and row of
/// the first non-finite gradient entry.
Matrix align_latents(const ebm::EnergyFunction& energy, const Matrix& z, const AlignConfig& cfg);
// Reads the EMA shadow or the live weights according to cfg.use_ema.
Matrix align_latents(const ebm::EnergyModel& model, const Matrix& z, const AlignConfig& cfg);

struct AlignTrace {
  Matrix aligned;              // [B x D]
  Matrix trace;                // [B x (l_steps + 1)], column i = energy at step i
  std::vector<Matrix> steps;   // z after each step; empty unless requested
};

AlignTrace align_energy_trace(const ebm::EnergyFunction& energy, const Matrix& z,
                              const AlignConfig& cfg, bool keep_steps = false);
AlignTrace align_energy_trace(const ebm::EnergyModel& model, const Matrix& z,
                              const AlignConfig& cfg, bool keep_steps = false);

/// [D x steps]: column i is the batch mean of (z_steps[i] - z_before) per dimension.
Matrix per_dimension_delta(const Matrix& z_before, std::span<const Matrix> z_steps);

}  // namespace eli::aligner
