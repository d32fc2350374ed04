#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "eli/numeric/matrix.hpp"
#include "eli/numeric/rng.hpp"

namespace eli::continuum {

using numeric::Matrix;

struct Examples {
  Matrix features;          // [N x F]
  std::vector<int> labels;  // [N], global class ids
};

/// Read-only access to a set of labelled examples. Every access goes through
/// read(), so a wrapper can observe exactly which split is touched.
class ExampleSource {
 public:
  virtual ~ExampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual Examples read(std::span<const std::size_t> indices) const = 0;

  Examples read_range(std::size_t begin, std::size_t end) const;
  Examples read_all() const { return read_range(0, size()); }
};

class InMemorySource final : public ExampleSource {
 public:
  explicit InMemorySource(Examples data);

  std::size_t size() const override { return data_.labels.size(); }
  std::size_t feature_dim() const override { return data_.features.cols(); }
  Examples read(std::span<const std::size_t> indices) const override;

 private:
  Examples data_;
};

struct Task {
  int task_id = 0;
  std::vector<int> classes;  // global ids; a label's position here is its head output
  std::shared_ptr<const ExampleSource> train;
  std::shared_ptr<const ExampleSource> test;

  // Index of label within classes; throws DataError if absent.
  std::size_t local_label(int label) const;
};

/// Ordered tasks over pairwise disjoint class sets, each with a train and a
/// test split.
struct TaskStream {
  std::vector<Task> tasks;

  const Task& task(int task_id) const;
};

// Checks disjoint class sets and that every label belongs to its task. Reads
// every example of every split.
void validate(const TaskStream& stream);

// Splits one labelled pool into per-task sources by class group.
std::vector<std::shared_ptr<const ExampleSource>> split_by_classes(
    const Examples& pool, const std::vector<std::vector<int>>& class_groups,
    std::size_t max_per_task = 0);

/// Two-task MNIST: task 1 holds digits 0-4, task 2 digits 5-9; pixels scaled
/// to [0, 1]. Verifies a SHA256SUMS manifest when one is present.
/// max_train / max_test cap each task's split (0 keeps everything); the
/// first examples in file order are kept.
TaskStream build_two_task_mnist(const std::filesystem::path& data_root, std::size_t max_train = 0,
                                std::size_t max_test = 0);

// Translation of the latent space applied to a backbone to emulate drift.
struct DriftMap {
  std::vector<double> shift;  // [D]
};

struct SyntheticSpec {
  std::size_t classes_per_task = 5;
  std::size_t dim = 16;
  double drift = 0.0;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 100;
  double class_spread = 0.5;  // cluster standard deviation; centres have unit-variance entries
};

struct SyntheticDrift {
  TaskStream stream;
  DriftMap drift;
};

/// Gaussian class clusters for two tasks in dim dimensions, plus a drift map
/// of length spec.drift along a random unit direction.
SyntheticDrift build_synthetic_drift(numeric::Rng& rng, const SyntheticSpec& spec);

}  // namespace eli::continuum
