#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eli/aligner/align.hpp"
#include "eli/continuum/classifier.hpp"
#include "eli/continuum/task.hpp"
#include "eli/dataio/config.hpp"
#include "eli/dataio/report.hpp"
#include "eli/ebm/energy.hpp"

namespace eli::continuum {

enum class Dataset { mnist, synthetic };

struct ExperimentConfig {
  std::uint64_t seed = 0;
  Dataset dataset = Dataset::mnist;
  std::string data_root;                // MNIST IDX directory
  std::size_t max_train_per_task = 0;   // 0 keeps the full split
  std::size_t max_test_per_task = 0;
  SyntheticSpec synthetic;

  std::size_t latent_dim = 32;
  std::vector<std::size_t> backbone_hidden{256, 128};
  TrainConfig base;
  TrainConfig finetune;
  ebm::EbmTrainConfig ebm;
  aligner::AlignConfig align;

  std::size_t snapshot_rows = 500;  // per task, in the 2-D latent exports

  void validate() const;
};

// Every field under a dotted key; values round-trip exactly.
dataio::KeyValues to_key_values(const ExperimentConfig& cfg);
// Starts from defaults and applies kv. Unknown keys and bad values throw
// ConfigError naming the key.
ExperimentConfig from_key_values(const dataio::KeyValues& kv);

// Energy-model training settings under the "ebm." keys, for checkpoint echoes.
dataio::KeyValues to_key_values(const ebm::EbmTrainConfig& cfg);
ebm::EbmTrainConfig ebm_config_from_key_values(const dataio::KeyValues& kv);

// Observes stage boundaries; begin is true on entry, false on normal exit.
using StageObserver = std::function<void(const std::string& stage, bool begin)>;

struct ExperimentResult {
  dataio::AlignmentReport report;
  ClassifierModel previous;  // M^{T1}
  ClassifierModel current;   // M^{T2}
  ebm::EnergyModel energy;
};

/// Full pipeline over the stream: train on task 1, drift (finetune on task 2,
/// or the synthetic drift map), fit the energy model on task-2 inputs seen
/// through both backbones, then measure task-1 test accuracy before drift,
/// after drift and after alignment. Task-1 training data is read only while
/// training the base model. Failures are rethrown as StageError.
ExperimentResult run_eli_experiment(const ExperimentConfig& cfg, const TaskStream& stream,
                                    const std::optional<DriftMap>& drift = {},
                                    const StageObserver& observer = {});

// Builds the stream (MNIST or synthetic) from cfg, then runs.
ExperimentResult run_eli_experiment(const ExperimentConfig& cfg,
                                    const StageObserver& observer = {});

}  // namespace eli::continuum
