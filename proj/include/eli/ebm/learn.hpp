#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "eli/ebm/energy.hpp"
#include "eli/numeric/rng.hpp"

namespace eli::ebm {

enum class LatentOrigin { prev_model, curr_model };

/// Latent vectors with their extractor of origin and optional task label.
struct LatentBatch {
  Matrix latents;                         // [B x D]
  std::vector<LatentOrigin> origin;       // per row
  std::vector<std::optional<int>> task_id;  // per row

  std::size_t size() const { return latents.rows(); }
  std::size_t dim() const { return latents.cols(); }
};

// Throws ShapeError when per-row metadata lengths disagree with the latents.
void validate(const LatentBatch& batch);

/// Synchronized source of (previous-extractor, current-extractor) latent
/// batches: row b of both matrices comes from the same input.
class LatentPairStream {
 public:
  virtual ~LatentPairStream() = default;
  virtual std::size_t dim() const = 0;
  virtual std::pair<Matrix, Matrix> next(std::size_t batch_size, numeric::Rng& rng) = 0;
};

/// Pair stream over two precomputed latent tables. Batches are drawn without
/// replacement within a pass; each pass is a fresh shuffle.
class PairedLatentPool final : public LatentPairStream {
 public:
  PairedLatentPool(Matrix prev, Matrix curr);

  std::size_t dim() const override { return prev_.cols(); }
  std::size_t size() const { return prev_.rows(); }
  std::pair<Matrix, Matrix> next(std::size_t batch_size, numeric::Rng& rng) override;

  const Matrix& prev() const { return prev_; }
  const Matrix& curr() const { return curr_; }

 private:
  Matrix prev_;
  Matrix curr_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

struct EbmTrainingLog {
  std::vector<double> loss;
  std::vector<double> mean_in_energy;   // E over previous-extractor latents
  std::vector<double> mean_out_energy;  // E over Langevin negatives
};

/// Trains an energy model so previous-extractor latents get low energy and
/// Langevin samples started from current-extractor latents get high energy.
/// Per iteration: draw a paired batch, run the chain from the current batch,
/// form the loss, one RMSprop step on the live weights, one EMA update.
/// Negatives are constants for the parameter gradient.
EnergyModel learn_ebm(LatentPairStream& stream, const EbmTrainConfig& cfg, numeric::Rng& rng,
                      EbmTrainingLog* log = nullptr);

}  // namespace eli::ebm
