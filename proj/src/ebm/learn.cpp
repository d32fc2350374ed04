#include "eli/ebm/learn.hpp"

#include <cmath>
#include <numeric>

#include "eli/ebm/langevin.hpp"
#include "eli/numeric/errors.hpp"

namespace eli::ebm {

using numeric::Rng;

void validate(const LatentBatch& batch) {
  if (batch.origin.size() != batch.size() || batch.task_id.size() != batch.size()) {
    throw ShapeError("latent batch metadata does not match " + batch.latents.shape_string());
  }
}

PairedLatentPool::PairedLatentPool(Matrix prev, Matrix curr)
    : prev_(std::move(prev)), curr_(std::move(curr)) {
  if (prev_.rows() != curr_.rows() || prev_.cols() != curr_.cols()) {
    throw ShapeError("paired latents differ: " + prev_.shape_string() + " vs " +
                     curr_.shape_string());
  }
  if (prev_.rows() == 0) throw ArgumentError("paired latent pool is empty");
  order_.resize(prev_.rows());
  cursor_ = order_.size();  // forces a shuffle on first draw
}

std::pair<Matrix, Matrix> PairedLatentPool::next(std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> rows;
  rows.reserve(batch_size);
  while (rows.size() < batch_size) {
    if (cursor_ == order_.size()) {
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      for (std::size_t i = order_.size(); i > 1; --i) {
        std::swap(order_[i - 1], order_[rng.uniform_index(i)]);
      }
      cursor_ = 0;
    }
    rows.push_back(order_[cursor_++]);
  }
  return {numeric::gather_rows(prev_, rows), numeric::gather_rows(curr_, rows)};
}

EnergyModel learn_ebm(LatentPairStream& stream, const EbmTrainConfig& cfg, Rng& rng,
                      EbmTrainingLog* log) {
  cfg.validate();
  const std::size_t dim = stream.dim();
  EnergyModel model = init_energy_model(rng, dim, cfg);
  auto opt = numeric::make_rmsprop_state(model.net, cfg.learning_rate, cfg.rmsprop_decay,
                                         cfg.rmsprop_epsilon);

  // Signs of d loss / d mean energy for the in-distribution and sampled terms.
  const double sign_in = cfg.loss_sign == LossSign::contrastive ? 1.0 : -1.0;
  const double sign_out = -sign_in;
  const double reg = cfg.energy_reg_coeff;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    auto [prev, curr] = stream.next(cfg.batch_size, rng);
    if (prev.cols() != dim || curr.cols() != dim || prev.rows() != curr.rows()) {
      throw ShapeError("learn_ebm: iteration " + std::to_string(it) + " drew " +
                       prev.shape_string() + " and " + curr.shape_string() + ", expected dim " +
                       std::to_string(dim));
    }
    const Matrix sampled = langevin_sample(MlpEnergy(model.net), curr, cfg.langevin, rng);

    const auto fwd_in = numeric::mlp_forward(model.net, prev);
    const auto fwd_out = numeric::mlp_forward(model.net, sampled);
    const std::size_t b_in = prev.rows();
    const std::size_t b_out = sampled.rows();

    double mean_in = 0.0, mean_out = 0.0, sq_in = 0.0, sq_out = 0.0;
    for (std::size_t r = 0; r < b_in; ++r) {
      const double e = fwd_in.output(r, 0);
      mean_in += e;
      sq_in += e * e;
    }
    for (std::size_t r = 0; r < b_out; ++r) {
      const double e = fwd_out.output(r, 0);
      mean_out += e;
      sq_out += e * e;
    }
    mean_in /= static_cast<double>(b_in);
    mean_out /= static_cast<double>(b_out);
    sq_in /= static_cast<double>(b_in);
    sq_out /= static_cast<double>(b_out);
    const double loss = sign_in * mean_in + sign_out * mean_out + reg * (sq_in + sq_out);
    if (!std::isfinite(loss)) {
      throw NumericError("learn_ebm: non-finite loss at iteration " + std::to_string(it));
    }

    Matrix up_in(b_in, 1), up_out(b_out, 1);
    for (std::size_t r = 0; r < b_in; ++r) {
      up_in(r, 0) = (sign_in + 2.0 * reg * fwd_in.output(r, 0)) / static_cast<double>(b_in);
    }
    for (std::size_t r = 0; r < b_out; ++r) {
      up_out(r, 0) = (sign_out + 2.0 * reg * fwd_out.output(r, 0)) / static_cast<double>(b_out);
    }
    MlpParams grads = numeric::mlp_backward_params(model.net, fwd_in.cache, up_in);
    const MlpParams grads_out = numeric::mlp_backward_params(model.net, fwd_out.cache, up_out);
    numeric::for_each_parameter(grads, grads_out, [](double& g, double h) { g += h; });

    bool finite_grads = true;
    numeric::for_each_parameter(grads, [&](double g) { finite_grads &= std::isfinite(g); });
    if (!finite_grads) {
      throw NumericError("learn_ebm: non-finite gradient at iteration " + std::to_string(it));
    }
    numeric::rmsprop_apply(model.net, grads, opt);
    numeric::ema_apply(model.ema, model.net);

    if (log) {
      log->loss.push_back(loss);
      log->mean_in_energy.push_back(mean_in);
      log->mean_out_energy.push_back(mean_out);
    }
  }
  return model;
}

}  // namespace eli::ebm
