#include "eli/continuum/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eli/numeric/errors.hpp"
#include "eli/numeric/optim.hpp"

namespace eli::continuum {

namespace {

constexpr std::size_t kEvalChunk = 2048;

MlpParams stack(const ClassifierModel& m) {
  MlpParams all = m.backbone;
  all.layers.insert(all.layers.end(), m.head.layers.begin(), m.head.layers.end());
  return all;
}

ClassifierModel unstack(MlpParams all, std::size_t backbone_layers) {
  ClassifierModel m;
  m.backbone.layers.assign(all.layers.begin(), all.layers.begin() + backbone_layers);
  m.head.layers.assign(all.layers.begin() + backbone_layers, all.layers.end());
  return m;
}

// Softmax cross-entropy against local labels. Writes d loss / d logits
// (already divided by the batch size) and returns the summed loss.
double cross_entropy(const Matrix& logits, const std::vector<std::size_t>& targets, Matrix& grad,
                     std::size_t& correct) {
  const std::size_t b = logits.rows();
  grad = Matrix(b, logits.cols());
  double loss = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    loss += log_z - row[targets[r]];
    auto g = grad.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      g[c] = std::exp(row[c] - log_z) / static_cast<double>(b);
    }
    g[targets[r]] -= 1.0 / static_cast<double>(b);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    correct += best == targets[r];
  }
  return loss;
}

}  // namespace

void validate(const ClassifierModel& model) {
  numeric::validate(model.backbone);
  numeric::validate(model.head);
  if (model.head.input_dim() != model.backbone.output_dim()) {
    throw ShapeError("head expects latent dim " + std::to_string(model.head.input_dim()) +
                     ", backbone outputs " + std::to_string(model.backbone.output_dim()));
  }
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("classifier batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("classifier learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("classifier momentum must lie in [0, 1)");
}

MlpParams init_backbone(numeric::Rng& rng, std::size_t input_dim,
                        const std::vector<std::size_t>& hidden, std::size_t latent_dim,
                        numeric::Activation latent_activation) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(latent_dim);
  return numeric::kaiming_init(rng, dims, numeric::Activation::relu, latent_activation);
}

MlpParams init_head(numeric::Rng& rng, std::size_t latent_dim, std::size_t n_classes) {
  const std::size_t dims[] = {latent_dim, n_classes};
  return numeric::kaiming_init(rng, dims, numeric::Activation::identity,
                               numeric::Activation::identity);
}

TrainOutcome train_classifier(ClassifierModel model, const Task& task, const TrainConfig& cfg,
                              numeric::Rng& rng) {
  cfg.validate();
  validate(model);
  if (model.head.output_dim() != task.classes.size()) {
    throw ShapeError("head has " + std::to_string(model.head.output_dim()) + " outputs, task " +
                     std::to_string(task.task_id) + " has " + std::to_string(task.classes.size()) +
                     " classes");
  }
  const ExampleSource& source = *task.train;
  const std::size_t n = source.size();
  if (n == 0) throw ArgumentError("task " + std::to_string(task.task_id) + " has no training examples");
  if (source.feature_dim() != model.backbone.input_dim()) {
    throw ShapeError("backbone expects " + std::to_string(model.backbone.input_dim()) +
                     " features, task provides " + std::to_string(source.feature_dim()));
  }

  const std::size_t backbone_layers = model.backbone.layers.size();
  MlpParams params = stack(model);
  auto opt = numeric::make_sgd_state(params, cfg.learning_rate, cfg.momentum);

  TrainOutcome out;
  std::vector<std::size_t> order(n);
  std::vector<std::size_t> targets;
  Matrix grad;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0, batch = 0; start < n; start += cfg.batch_size, ++batch) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const Examples ex = source.read(std::span(order).subspan(start, stop - start));
      targets.clear();
      for (int label : ex.labels) targets.push_back(task.local_label(label));

      const auto fwd = numeric::mlp_forward(params, ex.features);
      const double loss = cross_entropy(fwd.output, targets, grad, correct);
      if (!std::isfinite(loss)) {
        throw NumericError("classifier: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch));
      }
      loss_sum += loss;
      const MlpParams g = numeric::mlp_backward_params(params, fwd.cache, grad);
      numeric::sgd_apply(params, g, opt);
    }
    out.epoch_loss.push_back(loss_sum / static_cast<double>(n));
    out.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  }
  out.model = unstack(std::move(params), backbone_layers);
  return out;
}

TrainOutcome train_base(const Task& task, std::size_t latent_dim,
                        const std::vector<std::size_t>& hidden, const TrainConfig& cfg,
                        numeric::Rng& rng, numeric::Activation latent_activation) {
  if (!task.train || task.train->size() == 0) {
    throw ArgumentError("task " + std::to_string(task.task_id) + " has no training examples");
  }
  if (latent_dim == 0) throw ConfigError("latent_dim must be positive");
  ClassifierModel model;
  model.backbone = init_backbone(rng, task.train->feature_dim(), hidden, latent_dim, latent_activation);
  model.head = init_head(rng, latent_dim, task.classes.size());
  return train_classifier(std::move(model), task, cfg, rng);
}

TrainOutcome finetune(const ClassifierModel& model, const Task& task, const TrainConfig& cfg,
                      numeric::Rng& rng) {
  ClassifierModel next{model.backbone, init_head(rng, model.latent_dim(), task.classes.size())};
  return train_classifier(std::move(next), task, cfg, rng);
}

MlpParams apply_drift(const MlpParams& backbone, const DriftMap& drift) {
  numeric::validate(backbone);
  if (drift.shift.size() != backbone.output_dim()) {
    throw ShapeError("drift map has dim " + std::to_string(drift.shift.size()) +
                     ", backbone outputs " + std::to_string(backbone.output_dim()));
  }
  if (backbone.layers.back().activation != numeric::Activation::identity) {
    throw ArgumentError("apply_drift needs a backbone with an identity output layer");
  }
  MlpParams out = backbone;
  auto& bias = out.layers.back().bias;
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] += drift.shift[i];
  return out;
}

ebm::LatentBatch extract_latents(const MlpParams& backbone, const Matrix& features,
                                 ebm::LatentOrigin origin, std::optional<int> task_id) {
  ebm::LatentBatch batch;
  batch.latents = numeric::mlp_predict(backbone, features);
  batch.origin.assign(features.rows(), origin);
  batch.task_id.assign(features.rows(), task_id);
  return batch;
}

Matrix predict_logits(const MlpParams& head, const MlpParams& backbone,
                      const std::optional<LatentAligner>& align, const Matrix& features) {
  Matrix z = numeric::mlp_predict(backbone, features);
  const bool in_latent = align && align->config.space == aligner::AlignSpace::latent;
  const bool in_logit = align && align->config.space == aligner::AlignSpace::logit;
  if (align && !align->model) throw ArgumentError("aligner has no energy model");
  if (in_latent) z = aligner::align_latents(*align->model, z, align->config);
  Matrix logits = numeric::mlp_predict(head, z);
  if (in_logit) logits = aligner::align_latents(*align->model, logits, align->config);
  return logits;
}

std::vector<std::size_t> argmax_rows(const Matrix& m) {
  std::vector<std::size_t> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double evaluate(const MlpParams& head, const MlpParams& backbone,
                const std::optional<LatentAligner>& align, const ExampleSource& examples,
                const Task& task) {
  const std::size_t n = examples.size();
  if (n == 0) throw ArgumentError("evaluate: empty test set");
  if (head.output_dim() != task.classes.size()) {
    throw ShapeError("head has " + std::to_string(head.output_dim()) + " outputs, task " +
                     std::to_string(task.task_id) + " has " + std::to_string(task.classes.size()) +
                     " classes");
  }
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += kEvalChunk) {
    const Examples ex = examples.read_range(start, std::min(n, start + kEvalChunk));
    const auto pred = argmax_rows(predict_logits(head, backbone, align, ex.features));
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == task.local_label(ex.labels[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace eli::continuum
