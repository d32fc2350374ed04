#include "eli/ebm/energy.hpp"

#include "eli/numeric/errors.hpp"

namespace eli::ebm {

namespace {

void check_dim(std::size_t expected, const Matrix& z) {
  if (z.cols() != expected) {
    throw ShapeError("energy expects latent dim " + std::to_string(expected) + ", got " +
                     z.shape_string());
  }
}

std::vector<double> column0(const Matrix& m) {
  std::vector<double> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m(r, 0);
  return out;
}

}  // namespace

void LangevinConfig::validate() const {
  if (!(step_size > 0.0)) throw ConfigError("langevin step_size must be positive");
  if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("langevin grad_clip must be positive");
}

std::string to_string(LossSign s) { return s == LossSign::literal ? "literal" : "contrastive"; }

LossSign parse_loss_sign(const std::string& s) {
  if (s == "contrastive") return LossSign::contrastive;
  if (s == "literal") return LossSign::literal;
  throw ConfigError("unknown loss_sign '" + s + "' (expected contrastive|literal)");
}

void EbmTrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("ebm batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("ebm learning_rate must be positive");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("ebm ema_decay must lie in [0, 1)");
  if (!(energy_reg_coeff >= 0.0)) throw ConfigError("ebm energy_reg_coeff must be non-negative");
  if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0)) {
    throw ConfigError("ebm rmsprop_decay must lie in (0, 1)");
  }
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw ConfigError("ebm hidden_dims entries must be positive");
  }
  langevin.validate();
}

EnergyModel init_energy_model(numeric::Rng& rng, std::size_t input_dim,
                              const EbmTrainConfig& cfg) {
  if (input_dim == 0) throw ShapeError("energy model input dim must be positive");
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  dims.push_back(1);
  EnergyModel model;
  model.net = numeric::kaiming_init(rng, dims, cfg.hidden_activation, numeric::Activation::identity);
  model.ema = numeric::make_ema_state(model.net, cfg.ema_decay);
  model.config = cfg;
  return model;
}

void validate(const EnergyModel& model) {
  numeric::validate(model.net);
  if (model.net.output_dim() != 1) {
    throw ShapeError("energy network must have a single output, has " +
                     std::to_string(model.net.output_dim()));
  }
  if (model.net.layers.back().activation != numeric::Activation::identity) {
    throw ShapeError("energy network output layer must be identity");
  }
  numeric::require_same_shape(model.net, model.ema.shadow, "energy model EMA shadow");
}

MlpEnergy::MlpEnergy(const MlpParams& params) : params_(&params) {
  numeric::validate(params);
  if (params.output_dim() != 1) throw ShapeError("energy network must have a single output");
}

std::vector<double> MlpEnergy::energy(const Matrix& z) const {
  check_dim(input_dim(), z);
  return column0(numeric::mlp_predict(*params_, z));
}

EnergyEvaluation MlpEnergy::evaluate(const Matrix& z) const {
  check_dim(input_dim(), z);
  const auto fwd = numeric::mlp_forward(*params_, z);
  // Rows are independent, so a ones upstream yields each row's own gradient.
  Matrix grad = numeric::mlp_backward_input(*params_, fwd.cache, Matrix(z.rows(), 1, 1.0));
  return EnergyEvaluation{column0(fwd.output), std::move(grad)};
}

QuadraticEnergy::QuadraticEnergy(std::size_t dim, double curvature)
    : dim_(dim), curvature_(curvature) {}

std::vector<double> QuadraticEnergy::energy(const Matrix& z) const {
  check_dim(dim_, z);
  std::vector<double> out(z.rows(), 0.0);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    double s = 0.0;
    for (double v : z.row(r)) s += v * v;
    out[r] = 0.5 * curvature_ * s;
  }
  return out;
}

EnergyEvaluation QuadraticEnergy::evaluate(const Matrix& z) const {
  EnergyEvaluation e{energy(z), z};
  if (curvature_ != 1.0) {
    for (double& g : e.grad.data()) g *= curvature_;
  }
  return e;
}

MlpEnergy energy_surface(const EnergyModel& model, bool use_ema) {
  return MlpEnergy(model.params(use_ema));
}

std::vector<double> energy(const EnergyModel& model, const Matrix& z, bool use_ema) {
  return energy_surface(model, use_ema).energy(z);
}

}  // namespace eli::ebm
