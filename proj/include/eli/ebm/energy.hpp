#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "eli/numeric/matrix.hpp"
#include "eli/numeric/mlp.hpp"
#include "eli/numeric/optim.hpp"

namespace eli::ebm {

using numeric::Matrix;
using numeric::MlpParams;

struct LangevinConfig {
  std::size_t steps = 30;
  double step_size = 0.1;
  bool noise_enabled = true;
  // Entrywise clip of the energy gradient inside each step; nullopt disables.
  std::optional<double> grad_clip = 0.03;

  void validate() const;
  friend bool operator==(const LangevinConfig&, const LangevinConfig&) = default;
};

// How the per-iteration training loss combines the two energy means.
enum class LossSign {
  // mean E(prev) - mean E(sampled): pushes previous-model latents down.
  contrastive,
  // -mean E(prev) + mean E(sampled), the reversed sign.
  literal,
};

std::string to_string(LossSign s);
LossSign parse_loss_sign(const std::string& s);

struct EbmTrainConfig {
  std::size_t iterations = 1500;
  std::size_t batch_size = 128;
  double learning_rate = 1e-4;
  LangevinConfig langevin{};
  double ema_decay = 0.999;
  std::vector<std::size_t> hidden_dims{64, 64};
  double energy_reg_coeff = 0.1;
  LossSign loss_sign = LossSign::contrastive;
  numeric::Activation hidden_activation = numeric::Activation::relu;
  double rmsprop_decay = 0.99;
  double rmsprop_epsilon = 1e-8;

  void validate() const;
  friend bool operator==(const EbmTrainConfig&, const EbmTrainConfig&) = default;
};

/// E_psi: an MLP with a single identity output neuron, plus its EMA shadow.
struct EnergyModel {
  MlpParams net;
  numeric::EmaState ema;
  EbmTrainConfig config;

  std::size_t input_dim() const { return net.input_dim(); }
  const MlpParams& params(bool use_ema) const { return use_ema ? ema.shadow : net; }
};

// Kaiming-initialized model with dims {input, hidden..., 1}; EMA shadow equals
// the initial weights.
EnergyModel init_energy_model(numeric::Rng& rng, std::size_t input_dim,
                              const EbmTrainConfig& cfg);

// Checks the single-output invariant and network shape.
void validate(const EnergyModel& model);

struct EnergyEvaluation {
  std::vector<double> energies;  // one per row
  Matrix grad;                   // d energy_b / d z_b, row by row
};

/// Scalar energy surface over R^D. Implemented by the learned network and
/// by closed-form test surfaces.
class EnergyFunction {
 public:
  virtual ~EnergyFunction() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::vector<double> energy(const Matrix& z) const = 0;
  virtual EnergyEvaluation evaluate(const Matrix& z) const = 0;
};

// Non-owning view of MLP parameters as an energy surface.
class MlpEnergy final : public EnergyFunction {
 public:
  explicit MlpEnergy(const MlpParams& params);

  std::size_t input_dim() const override { return params_->input_dim(); }
  std::vector<double> energy(const Matrix& z) const override;
  EnergyEvaluation evaluate(const Matrix& z) const override;

 private:
  const MlpParams* params_;
};

// E(z) = curvature / 2 * ||z||^2.
class QuadraticEnergy final : public EnergyFunction {
 public:
  explicit QuadraticEnergy(std::size_t dim, double curvature = 1.0);

  std::size_t input_dim() const override { return dim_; }
  std::vector<double> energy(const Matrix& z) const override;
  EnergyEvaluation evaluate(const Matrix& z) const override;

 private:
  std::size_t dim_;
  double curvature_;
};

MlpEnergy energy_surface(const EnergyModel& model, bool use_ema);

// Per-row energy; use_ema selects the shadow parameters.
std::vector<double> energy(const EnergyModel& model, const Matrix& z, bool use_ema);

}  // namespace eli::ebm
