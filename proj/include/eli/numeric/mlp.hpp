#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eli/numeric/matrix.hpp"
#include "eli/numeric/rng.hpp"

namespace eli::numeric {

enum class Activation { relu, identity, softplus };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// One fully connected layer: y = act(x * weight^T + bias).
struct DenseLayer {
  Matrix weight;  // [out x in]
  std::vector<double> bias;  // [out]
  Activation activation = Activation::identity;

  std::size_t in_dim() const noexcept { return weight.cols(); }
  std::size_t out_dim() const noexcept { return weight.rows(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Parameters of a multilayer perceptron. Gradients use the same type, so
/// optimizers can walk parameters and gradients in lockstep.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// Throws ShapeError naming the first layer whose input does not match the
// previous layer's output.
void validate(const MlpParams& params);

bool same_shape(const MlpParams& a, const MlpParams& b);
void require_same_shape(const MlpParams& a, const MlpParams& b, std::string_view what);

MlpParams zeros_like(const MlpParams& params);

// Calls fn(a_entry, b_entry) for every weight then every bias entry of every
// layer, in a fixed order. Shapes must match.
void for_each_parameter(MlpParams& a, const MlpParams& b,
                        const std::function<void(double&, double)>& fn);
void for_each_parameter(const MlpParams& a, const std::function<void(double)>& fn);

struct ForwardCache {
  std::vector<Matrix> inputs;           // input to layer k
  std::vector<Matrix> pre_activations;  // x * W^T + b at layer k
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

ForwardResult mlp_forward(const MlpParams& params, const Matrix& x);
// Forward pass without keeping the cache.
Matrix mlp_predict(const MlpParams& params, const Matrix& x);

// Gradient of sum(upstream .* output) with respect to every parameter.
MlpParams mlp_backward_params(const MlpParams& params, const ForwardCache& cache,
                              const Matrix& upstream_grad);
// Gradient of sum(upstream .* output) with respect to the network input.
Matrix mlp_backward_input(const MlpParams& params, const ForwardCache& cache,
                          const Matrix& upstream_grad);

struct MlpGradients {
  MlpParams params;
  Matrix input;
};
// Both gradients from a single backward sweep.
MlpGradients mlp_backward(const MlpParams& params, const ForwardCache& cache,
                          const Matrix& upstream_grad);

/// Kaiming-normal init: W ~ N(0, 2 / fan_in), b = 0.
/// layer_dims = {in, hidden..., out}; hidden layers use `hidden`, the last
/// layer uses `output`.
MlpParams kaiming_init(Rng& rng, std::span<const std::size_t> layer_dims,
                       Activation hidden = Activation::relu,
                       Activation output = Activation::identity);

}  // namespace eli::numeric
