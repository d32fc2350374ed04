#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "eli/numeric/errors.hpp"
#include "eli/numeric/rng.hpp"

namespace eli::cli {

namespace {

using numeric::Activation;
using numeric::Matrix;
using numeric::MlpParams;
using numeric::Rng;

// sum(u .* f(x)), with its own forward pass in extended precision so the
// differences are not swamped by double rounding.
long double weighted_output(const MlpParams& p, const Matrix& x, const Matrix& u) {
  long double total = 0.0L;
  std::vector<long double> in, next;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    in.assign(x.row(r).begin(), x.row(r).end());
    for (const auto& layer : p.layers) {
      next.assign(layer.out_dim(), 0.0L);
      for (std::size_t j = 0; j < layer.out_dim(); ++j) {
        long double v = layer.bias[j];
        for (std::size_t k = 0; k < layer.in_dim(); ++k) v += static_cast<long double>(layer.weight(j, k)) * in[k];
        switch (layer.activation) {
          case Activation::relu: v = v > 0.0L ? v : 0.0L; break;
          case Activation::softplus: v = v > 0.0L ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); break;
          case Activation::identity: break;
        }
        next[j] = v;
      }
      in.swap(next);
    }
    for (std::size_t j = 0; j < in.size(); ++j) total += in[j] * u(r, j);
  }
  return total;
}

double rel_error(double a, double n) {
  const double denom = std::max({std::abs(a), std::abs(n), 1e-6});
  return std::abs(a - n) / denom;
}

bool near_kink(const MlpParams& p, const Matrix& x, double margin) {
  const auto fwd = numeric::mlp_forward(p, x);
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    if (p.layers[k].activation != Activation::relu) continue;
    for (double v : fwd.cache.pre_activations[k].values()) {
      if (std::abs(v) < margin) return true;
    }
  }
  return false;
}

MlpParams random_network(Rng& rng) {
  const std::size_t depth = 1 + rng.uniform_index(3);
  std::vector<std::size_t> dims{2 + rng.uniform_index(5)};
  for (std::size_t k = 0; k < depth; ++k) dims.push_back(1 + rng.uniform_index(6));
  MlpParams p = numeric::kaiming_init(rng, dims, Activation::relu, Activation::identity);
  for (auto& layer : p.layers) {
    layer.activation = rng.uniform() < 0.5 ? Activation::relu : Activation::identity;
    for (double& b : layer.bias) b = 0.1 * rng.normal();
  }
  return p;
}

}  // namespace

GradcheckResult run_gradcheck(const GradcheckConfig& cfg, const BackwardFn& backward) {
  if (cfg.networks == 0 || cfg.probes_per_network == 0 || cfg.probe_batch == 0) {
    throw ArgumentError("gradcheck needs at least one network, probe and row");
  }
  if (!(cfg.step > 0.0)) throw ArgumentError("gradcheck step must be positive");
  const BackwardFn bw = backward ? backward : BackwardFn(numeric::mlp_backward);
  const double h = cfg.step;
  Rng rng(cfg.seed);
  GradcheckResult result;

  for (std::size_t n = 0; n < cfg.networks; ++n) {
    MlpParams p = random_network(rng);
    for (std::size_t probe = 0; probe < cfg.probes_per_network; ++probe) {
      Matrix x = numeric::gaussian(rng, cfg.probe_batch, p.input_dim());
      for (int attempt = 0; near_kink(p, x, cfg.kink_margin); ++attempt) {
        if (attempt == 1000) throw NumericError("gradcheck: no kink-free probe found");
        ++result.redrawn;
        x = numeric::gaussian(rng, cfg.probe_batch, p.input_dim());
      }
      const Matrix u = numeric::gaussian(rng, cfg.probe_batch, p.output_dim());
      const auto fwd = numeric::mlp_forward(p, x);
      const numeric::MlpGradients g = bw(p, fwd.cache, u);
      ++result.probes;

      Matrix xp = x;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = xp.data()[i];
        xp.data()[i] = orig + h;
        const long double plus = weighted_output(p, xp, u);
        xp.data()[i] = orig - h;
        const long double minus = weighted_output(p, xp, u);
        xp.data()[i] = orig;
        const double fd = static_cast<double>((plus - minus) / (2.0L * h));
        result.max_input_error = std::max(result.max_input_error, rel_error(g.input.values()[i], fd));
        ++result.entries;
      }

      MlpParams pp = p;
      for (std::size_t k = 0; k < pp.layers.size(); ++k) {
        auto check = [&](double& entry, double analytic) {
          const double orig = entry;
          entry = orig + h;
          const long double plus = weighted_output(pp, x, u);
          entry = orig - h;
          const long double minus = weighted_output(pp, x, u);
          entry = orig;
          const double fd = static_cast<double>((plus - minus) / (2.0L * h));
          result.max_param_error = std::max(result.max_param_error, rel_error(analytic, fd));
          ++result.entries;
        };
        auto w = pp.layers[k].weight.data();
        for (std::size_t i = 0; i < w.size(); ++i) check(w[i], g.params.layers[k].weight.values()[i]);
        auto& b = pp.layers[k].bias;
        for (std::size_t i = 0; i < b.size(); ++i) check(b[i], g.params.layers[k].bias[i]);
      }
    }
  }
  return result;
}

}  // namespace eli::cli
