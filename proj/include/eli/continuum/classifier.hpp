#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "eli/aligner/align.hpp"
#include "eli/continuum/task.hpp"
#include "eli/ebm/energy.hpp"
#include "eli/ebm/learn.hpp"
#include "eli/numeric/mlp.hpp"

namespace eli::continuum {

using numeric::MlpParams;

/// M = head o backbone. The backbone maps inputs to latents; the head maps
/// latents to one logit per class of its task.
struct ClassifierModel {
  MlpParams backbone;
  MlpParams head;

  std::size_t latent_dim() const { return backbone.output_dim(); }
  friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;
};

// Throws ShapeError if the head does not consume the backbone's output.
void validate(const ClassifierModel& model);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainOutcome {
  ClassifierModel model;
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
  double train_accuracy = 0.0;     // fraction, after the last epoch
};

// Backbone dims {input, hidden..., latent} with relu hidden layers and an
// identity output; linear head latent -> n_classes.
MlpParams init_backbone(numeric::Rng& rng, std::size_t input_dim,
                        const std::vector<std::size_t>& hidden, std::size_t latent_dim,
                        numeric::Activation latent_activation = numeric::Activation::identity);
MlpParams init_head(numeric::Rng& rng, std::size_t latent_dim, std::size_t n_classes);

/// Cross-entropy training of backbone and head with momentum SGD, shuffling
/// the task's training split every epoch. Throws NumericError on a
/// non-finite loss.
TrainOutcome train_classifier(ClassifierModel model, const Task& task, const TrainConfig& cfg,
                              numeric::Rng& rng);

// Fresh model on the first task.
TrainOutcome train_base(const Task& task, std::size_t latent_dim,
                        const std::vector<std::size_t>& hidden, const TrainConfig& cfg,
                        numeric::Rng& rng,
                        numeric::Activation latent_activation = numeric::Activation::identity);

// Continues the backbone of `model` on a new task under a freshly initialized
// head. The input model is left untouched.
TrainOutcome finetune(const ClassifierModel& model, const Task& task, const TrainConfig& cfg,
                      numeric::Rng& rng);

// Backbone with its output shifted by the drift map.
MlpParams apply_drift(const MlpParams& backbone, const DriftMap& drift);

// Backbone outputs, row order preserved.
ebm::LatentBatch extract_latents(const MlpParams& backbone, const Matrix& features,
                                 ebm::LatentOrigin origin, std::optional<int> task_id = {});

struct LatentAligner {
  const ebm::EnergyModel* model = nullptr;
  aligner::AlignConfig config;
};

// Logits for features under head o [align] o backbone. In latent space the
// aligner acts on backbone outputs, in logit space on head outputs.
Matrix predict_logits(const MlpParams& head, const MlpParams& backbone,
                      const std::optional<LatentAligner>& align, const Matrix& features);

// Index of the largest entry per row; the first wins ties.
std::vector<std::size_t> argmax_rows(const Matrix& m);

/// Task-aware accuracy in [0, 1]: argmax over the task's head outputs
/// compared with each example's position in task.classes. Throws
/// ArgumentError on an empty split.
double evaluate(const MlpParams& head, const MlpParams& backbone,
                const std::optional<LatentAligner>& align, const ExampleSource& examples,
                const Task& task);

}  // namespace eli::continuum
