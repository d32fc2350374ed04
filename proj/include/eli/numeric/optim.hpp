#pragma once

#include "eli/numeric/mlp.hpp"

namespace eli::numeric {

struct RmsPropState {
  double decay = 0.99;
  double epsilon = 1e-8;
  double learning_rate = 1e-4;
  MlpParams square_avg;  // same shape as the optimized params, starts at zero
};

RmsPropState make_rmsprop_state(const MlpParams& params, double learning_rate,
                                double decay = 0.99, double epsilon = 1e-8);

struct RmsPropResult {
  MlpParams params;
  RmsPropState state;
};

// square_avg <- decay * square_avg + (1 - decay) * g^2
// param      <- param - lr * g / (sqrt(square_avg) + epsilon)
// Throws NumericError on non-finite gradients.
RmsPropResult rmsprop_step(const MlpParams& params, const MlpParams& grads,
                           const RmsPropState& state);
// Same update, in place.
void rmsprop_apply(MlpParams& params, const MlpParams& grads, RmsPropState& state);

struct EmaState {
  double decay = 0.999;
  MlpParams shadow;
};

EmaState make_ema_state(const MlpParams& params, double decay);

// shadow <- decay * shadow + (1 - decay) * current
EmaState ema_update(const EmaState& ema, const MlpParams& current);
void ema_apply(EmaState& ema, const MlpParams& current);

// Classical momentum SGD: v <- momentum * v + g; p <- p - lr * v.
struct SgdMomentumState {
  double learning_rate = 0.01;
  double momentum = 0.9;
  MlpParams velocity;
};

SgdMomentumState make_sgd_state(const MlpParams& params, double learning_rate, double momentum);
void sgd_apply(MlpParams& params, const MlpParams& grads, SgdMomentumState& state);

}  // namespace eli::numeric
