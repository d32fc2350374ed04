#include "eli/numeric/optim.hpp"

#include <cmath>

#include "eli/numeric/errors.hpp"

namespace eli::numeric {

namespace {

// Entrywise walk over matching parameter sets without std::function overhead.
template <typename Fn>
void zip3(MlpParams& a, MlpParams& b, const MlpParams& c, Fn&& fn) {
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    auto wa = a.layers[k].weight.data();
    auto wb = b.layers[k].weight.data();
    auto wc = c.layers[k].weight.data();
    for (std::size_t i = 0; i < wa.size(); ++i) fn(wa[i], wb[i], wc[i]);
    auto& ba = a.layers[k].bias;
    auto& bb = b.layers[k].bias;
    const auto& bc = c.layers[k].bias;
    for (std::size_t i = 0; i < ba.size(); ++i) fn(ba[i], bb[i], bc[i]);
  }
}

void require_finite_grads(const MlpParams& grads, const char* who) {
  bool finite = true;
  for_each_parameter(grads, [&](double g) { finite = finite && std::isfinite(g); });
  if (!finite) throw NumericError(std::string(who) + ": non-finite gradient");
}

}  // namespace

RmsPropState make_rmsprop_state(const MlpParams& params, double learning_rate, double decay,
                                double epsilon) {
  if (!(decay > 0.0 && decay < 1.0)) throw ArgumentError("rmsprop decay must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ArgumentError("rmsprop epsilon must be positive");
  if (!(learning_rate > 0.0)) throw ArgumentError("rmsprop learning rate must be positive");
  return RmsPropState{decay, epsilon, learning_rate, zeros_like(params)};
}

void rmsprop_apply(MlpParams& params, const MlpParams& grads, RmsPropState& state) {
  require_same_shape(params, grads, "rmsprop");
  require_same_shape(params, state.square_avg, "rmsprop state");
  require_finite_grads(grads, "rmsprop");
  const double decay = state.decay;
  const double lr = state.learning_rate;
  const double eps = state.epsilon;
  zip3(params, state.square_avg, grads, [=](double& p, double& s, double g) {
    s = decay * s + (1.0 - decay) * g * g;
    p -= lr * g / (std::sqrt(s) + eps);
  });
}

RmsPropResult rmsprop_step(const MlpParams& params, const MlpParams& grads,
                           const RmsPropState& state) {
  RmsPropResult result{params, state};
  rmsprop_apply(result.params, grads, result.state);
  return result;
}

EmaState make_ema_state(const MlpParams& params, double decay) {
  if (!(decay >= 0.0 && decay <= 1.0)) throw ArgumentError("ema decay must lie in [0, 1]");
  return EmaState{decay, params};
}

void ema_apply(EmaState& ema, const MlpParams& current) {
  require_same_shape(ema.shadow, current, "ema_update");
  const double decay = ema.decay;
  if (decay == 0.0) {
    for_each_parameter(ema.shadow, current, [](double& s, double c) { s = c; });
    return;
  }
  // Written as a step toward c so that s == c stays a fixed point in floating point.
  const double rate = 1.0 - decay;
  for_each_parameter(ema.shadow, current, [rate](double& s, double c) { s += rate * (c - s); });
}

EmaState ema_update(const EmaState& ema, const MlpParams& current) {
  EmaState next = ema;
  ema_apply(next, current);
  return next;
}

SgdMomentumState make_sgd_state(const MlpParams& params, double learning_rate, double momentum) {
  if (!(learning_rate > 0.0)) throw ArgumentError("sgd learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("sgd momentum must lie in [0, 1)");
  return SgdMomentumState{learning_rate, momentum, zeros_like(params)};
}

void sgd_apply(MlpParams& params, const MlpParams& grads, SgdMomentumState& state) {
  require_same_shape(params, grads, "sgd");
  require_same_shape(params, state.velocity, "sgd state");
  require_finite_grads(grads, "sgd");
  const double mu = state.momentum;
  const double lr = state.learning_rate;
  zip3(params, state.velocity, grads, [=](double& p, double& v, double g) {
    v = mu * v + g;
    p -= lr * v;
  });
}

}  // namespace eli::numeric
