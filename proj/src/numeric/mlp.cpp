#include "eli/numeric/mlp.hpp"

#include <cmath>

#include "eli/numeric/errors.hpp"

namespace eli::numeric {

namespace {

double activate(Activation a, double v) {
  switch (a) {
    case Activation::relu:
      return v < 0.0 ? 0.0 : v;  // NaN passes through
    case Activation::identity:
      return v;
    case Activation::softplus:
      return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  }
  return v;
}

double activate_derivative(Activation a, double pre) {
  switch (a) {
    case Activation::relu:
      return pre > 0.0 ? 1.0 : 0.0;
    case Activation::identity:
      return 1.0;
    case Activation::softplus:
      return pre >= 0.0 ? 1.0 / (1.0 + std::exp(-pre)) : std::exp(pre) / (1.0 + std::exp(pre));
  }
  return 1.0;
}

std::string layer_name(std::size_t k) { return "layer " + std::to_string(k); }

// pre = x * W^T + b
Matrix affine(const DenseLayer& layer, const Matrix& x) {
  Matrix pre = matmul(x, transpose(layer.weight));
  for (std::size_t r = 0; r < pre.rows(); ++r) {
    auto row = pre.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
  }
  return pre;
}

Matrix apply_activation(Activation a, const Matrix& pre) {
  if (a == Activation::identity) return pre;
  Matrix out = pre;
  auto v = out.data();
  if (a == Activation::relu) {
    for (double& x : v) x = activate(Activation::relu, x);
  } else {
    for (double& x : v) x = activate(Activation::softplus, x);
  }
  return out;
}

void check_input(const MlpParams& params, const Matrix& x) {
  validate(params);
  if (x.cols() != params.input_dim()) {
    throw ShapeError(layer_name(0) + " expects input dim " + std::to_string(params.input_dim()) +
                     ", got " + x.shape_string());
  }
}

void check_backward(const MlpParams& params, const ForwardCache& cache,
                    const Matrix& upstream_grad) {
  const std::size_t n = params.layers.size();
  if (cache.inputs.size() != n || cache.pre_activations.size() != n) {
    throw ShapeError("forward cache holds " + std::to_string(cache.inputs.size()) +
                     " layers, network has " + std::to_string(n));
  }
  for (std::size_t k = 0; k < n; ++k) {
    const auto& layer = params.layers[k];
    if (cache.inputs[k].cols() != layer.in_dim() ||
        cache.pre_activations[k].cols() != layer.out_dim() ||
        cache.pre_activations[k].rows() != cache.inputs[k].rows()) {
      throw ShapeError("forward cache does not match " + layer_name(k));
    }
  }
  const std::size_t batch = n == 0 ? 0 : cache.inputs.front().rows();
  if (upstream_grad.rows() != batch || upstream_grad.cols() != params.output_dim()) {
    throw ShapeError("upstream gradient " + upstream_grad.shape_string() + " does not match output " +
                     std::to_string(batch) + "x" + std::to_string(params.output_dim()));
  }
}

// delta <- delta .* act'(pre), in place.
void scale_by_derivative(Activation a, const Matrix& pre, Matrix& delta) {
  if (a == Activation::identity) return;
  auto d = delta.data();
  auto p = pre.data();
  if (a == Activation::relu) {
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = p[i] > 0.0 ? d[i] : 0.0;
  } else {
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= activate_derivative(Activation::softplus, p[i]);
  }
}

MlpGradients backward(const MlpParams& params, const ForwardCache& cache, const Matrix& upstream,
                      bool want_params, bool want_input) {
  check_backward(params, cache, upstream);
  const std::size_t n = params.layers.size();
  MlpGradients grads;
  if (want_params) grads.params.layers.resize(n);

  Matrix delta = upstream;
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t k = n - 1 - step;
    const auto& layer = params.layers[k];
    scale_by_derivative(layer.activation, cache.pre_activations[k], delta);

    if (want_params) {
      auto& g = grads.params.layers[k];
      g.activation = layer.activation;
      g.weight = matmul_at_b(delta, cache.inputs[k]);
      g.bias.assign(layer.out_dim(), 0.0);
      for (std::size_t r = 0; r < delta.rows(); ++r) {
        const auto row = delta.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) g.bias[c] += row[c];
      }
    }
    if (k > 0 || want_input) delta = matmul(delta, layer.weight);
  }
  if (want_input) grads.input = std::move(delta);
  return grads;
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::identity:
      return "identity";
    case Activation::softplus:
      return "softplus";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  if (name == "softplus") return Activation::softplus;
  throw ArgumentError("unknown activation '" + std::string(name) + "'");
}

std::size_t MlpParams::input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }

std::size_t MlpParams::output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

std::size_t MlpParams::parameter_count() const {
  std::size_t count = 0;
  for (const auto& l : layers) count += l.weight.size() + l.bias.size();
  return count;
}

void validate(const MlpParams& params) {
  if (params.layers.empty()) throw ShapeError("network has no layers");
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& layer = params.layers[k];
    if (layer.bias.size() != layer.out_dim()) {
      throw ShapeError(layer_name(k) + " bias length " + std::to_string(layer.bias.size()) +
                       " does not match weight " + layer.weight.shape_string());
    }
    if (k > 0 && params.layers[k - 1].out_dim() != layer.in_dim()) {
      throw ShapeError(layer_name(k) + " expects input dim " + std::to_string(layer.in_dim()) +
                       " but " + layer_name(k - 1) + " outputs " +
                       std::to_string(params.layers[k - 1].out_dim()));
    }
  }
}

bool same_shape(const MlpParams& a, const MlpParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    const auto& la = a.layers[k];
    const auto& lb = b.layers[k];
    if (la.weight.rows() != lb.weight.rows() || la.weight.cols() != lb.weight.cols() ||
        la.bias.size() != lb.bias.size()) {
      return false;
    }
  }
  return true;
}

void require_same_shape(const MlpParams& a, const MlpParams& b, std::string_view what) {
  if (!same_shape(a, b)) throw ShapeError(std::string(what) + ": parameter shapes differ");
}

MlpParams zeros_like(const MlpParams& params) {
  MlpParams z = params;
  for (auto& l : z.layers) {
    l.weight = Matrix(l.weight.rows(), l.weight.cols());
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  return z;
}

void for_each_parameter(MlpParams& a, const MlpParams& b,
                        const std::function<void(double&, double)>& fn) {
  require_same_shape(a, b, "for_each_parameter");
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    auto wa = a.layers[k].weight.data();
    auto wb = b.layers[k].weight.data();
    for (std::size_t i = 0; i < wa.size(); ++i) fn(wa[i], wb[i]);
    auto& ba = a.layers[k].bias;
    const auto& bb = b.layers[k].bias;
    for (std::size_t i = 0; i < ba.size(); ++i) fn(ba[i], bb[i]);
  }
}

void for_each_parameter(const MlpParams& a, const std::function<void(double)>& fn) {
  for (const auto& l : a.layers) {
    for (double v : l.weight.data()) fn(v);
    for (double v : l.bias) fn(v);
  }
}

ForwardResult mlp_forward(const MlpParams& params, const Matrix& x) {
  check_input(params, x);
  ForwardResult result;
  result.cache.inputs.reserve(params.layers.size());
  result.cache.pre_activations.reserve(params.layers.size());
  Matrix current = x;
  for (const auto& layer : params.layers) {
    Matrix pre = affine(layer, current);
    Matrix post = apply_activation(layer.activation, pre);
    result.cache.inputs.push_back(std::move(current));
    result.cache.pre_activations.push_back(std::move(pre));
    current = std::move(post);
  }
  result.output = std::move(current);
  return result;
}

Matrix mlp_predict(const MlpParams& params, const Matrix& x) {
  check_input(params, x);
  Matrix current = x;
  for (const auto& layer : params.layers) {
    current = apply_activation(layer.activation, affine(layer, current));
  }
  return current;
}

MlpParams mlp_backward_params(const MlpParams& params, const ForwardCache& cache,
                              const Matrix& upstream_grad) {
  return backward(params, cache, upstream_grad, true, false).params;
}

Matrix mlp_backward_input(const MlpParams& params, const ForwardCache& cache,
                          const Matrix& upstream_grad) {
  return backward(params, cache, upstream_grad, false, true).input;
}

MlpGradients mlp_backward(const MlpParams& params, const ForwardCache& cache,
                          const Matrix& upstream_grad) {
  return backward(params, cache, upstream_grad, true, true);
}

MlpParams kaiming_init(Rng& rng, std::span<const std::size_t> layer_dims, Activation hidden,
                       Activation output) {
  if (layer_dims.size() < 2) {
    throw ShapeError("kaiming_init needs at least input and output dims");
  }
  MlpParams params;
  for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) {
    const std::size_t fan_in = layer_dims[k];
    const std::size_t fan_out = layer_dims[k + 1];
    if (fan_in == 0) throw ShapeError(layer_name(k) + " has zero fan_in");
    if (fan_out == 0) throw ShapeError(layer_name(k) + " has zero fan_out");
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    DenseLayer layer;
    layer.weight = gaussian(rng, fan_out, fan_in);
    for (double& w : layer.weight.data()) w *= stddev;
    layer.bias.assign(fan_out, 0.0);
    layer.activation = (k + 2 == layer_dims.size()) ? output : hidden;
    params.layers.push_back(std::move(layer));
  }
  return params;
}

}  // namespace eli::numeric
