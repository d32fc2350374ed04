#include "eli/continuum/task.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "eli/dataio/checksum.hpp"
#include "eli/dataio/idx.hpp"
#include "eli/numeric/errors.hpp"

namespace eli::continuum {

namespace {

Examples load_mnist_split(const std::filesystem::path& root, const std::string& images_name,
                          const std::string& labels_name) {
  const auto images = dataio::read_idx(root / images_name);
  const auto labels = dataio::read_idx(root / labels_name);
  if (images.dims.size() != 3) {
    throw FormatError((root / images_name).string() + ": expected rank 3, got rank " +
                      std::to_string(images.dims.size()));
  }
  if (labels.dims.size() != 1) {
    throw FormatError((root / labels_name).string() + ": expected rank 1, got rank " +
                      std::to_string(labels.dims.size()));
  }
  if (images.dims[0] != labels.dims[0]) {
    throw FormatError(images_name + " holds " + std::to_string(images.dims[0]) + " images but " +
                      labels_name + " holds " + std::to_string(labels.dims[0]) + " labels");
  }
  const std::size_t n = images.dims[0];
  const std::size_t pixels = std::size_t{images.dims[1]} * images.dims[2];
  Examples out{Matrix(n, pixels), std::vector<int>(n)};
  auto dst = out.features.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = images.payload[i] / 255.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels.payload[i] > 9) {
      throw DataError((root / labels_name).string() + ": label " +
                      std::to_string(labels.payload[i]) + " at index " + std::to_string(i));
    }
    out.labels[i] = labels.payload[i];
  }
  return out;
}

}  // namespace

Examples ExampleSource::read_range(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) {
    throw ArgumentError("read_range [" + std::to_string(begin) + ", " + std::to_string(end) +
                        ") outside source of size " + std::to_string(size()));
  }
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return read(idx);
}

InMemorySource::InMemorySource(Examples data) : data_(std::move(data)) {
  if (data_.features.rows() != data_.labels.size()) {
    throw ShapeError("example source: " + data_.features.shape_string() + " features but " +
                     std::to_string(data_.labels.size()) + " labels");
  }
}

Examples InMemorySource::read(std::span<const std::size_t> indices) const {
  Examples out{numeric::gather_rows(data_.features, indices), {}};
  out.labels.reserve(indices.size());
  for (auto i : indices) out.labels.push_back(data_.labels[i]);
  return out;
}

std::size_t Task::local_label(int label) const {
  const auto it = std::find(classes.begin(), classes.end(), label);
  if (it == classes.end()) {
    throw DataError("label " + std::to_string(label) + " is not in task " +
                    std::to_string(task_id));
  }
  return static_cast<std::size_t>(it - classes.begin());
}

const Task& TaskStream::task(int task_id) const {
  for (const auto& t : tasks) {
    if (t.task_id == task_id) return t;
  }
  throw ArgumentError("no task " + std::to_string(task_id) + " in stream");
}

void validate(const TaskStream& stream) {
  std::set<int> seen;
  for (const auto& t : stream.tasks) {
    for (int c : t.classes) {
      if (!seen.insert(c).second) {
        throw DataError("class " + std::to_string(c) + " appears in more than one task");
      }
    }
    for (const auto* split : {t.train.get(), t.test.get()}) {
      if (!split) throw DataError("task " + std::to_string(t.task_id) + " is missing a split");
      for (int label : split->read_all().labels) t.local_label(label);
    }
  }
}

std::vector<std::shared_ptr<const ExampleSource>> split_by_classes(
    const Examples& pool, const std::vector<std::vector<int>>& class_groups,
    std::size_t max_per_task) {
  std::vector<std::shared_ptr<const ExampleSource>> out;
  for (const auto& group : class_groups) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < pool.labels.size(); ++i) {
      if (max_per_task && rows.size() == max_per_task) break;
      if (std::find(group.begin(), group.end(), pool.labels[i]) != group.end()) rows.push_back(i);
    }
    Examples sub{numeric::gather_rows(pool.features, rows), {}};
    for (auto r : rows) sub.labels.push_back(pool.labels[r]);
    out.push_back(std::make_shared<InMemorySource>(std::move(sub)));
  }
  return out;
}

TaskStream build_two_task_mnist(const std::filesystem::path& data_root, std::size_t max_train,
                                std::size_t max_test) {
  if (!std::filesystem::is_directory(data_root)) {
    throw IoError("MNIST data directory not found: " + data_root.string());
  }
  dataio::verify_checksums(data_root);
  const Examples train = load_mnist_split(data_root, "train-images-idx3-ubyte", "train-labels-idx1-ubyte");
  const Examples test = load_mnist_split(data_root, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");

  const std::vector<std::vector<int>> groups{{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}};
  const auto train_parts = split_by_classes(train, groups, max_train);
  const auto test_parts = split_by_classes(test, groups, max_test);
  TaskStream stream;
  for (std::size_t t = 0; t < groups.size(); ++t) {
    stream.tasks.push_back(
        Task{static_cast<int>(t + 1), groups[t], train_parts[t], test_parts[t]});
  }
  return stream;
}

SyntheticDrift build_synthetic_drift(numeric::Rng& rng, const SyntheticSpec& spec) {
  if (spec.dim < 2) throw ArgumentError("synthetic drift needs dim >= 2");
  if (spec.classes_per_task == 0) throw ArgumentError("synthetic drift needs at least one class");
  const std::size_t n_classes = 2 * spec.classes_per_task;
  const Matrix centres = numeric::gaussian(rng, n_classes, spec.dim);

  auto sample = [&](std::size_t per_class, int first, int last) {
    const std::size_t n = per_class * static_cast<std::size_t>(last - first);
    Examples ex{Matrix(n, spec.dim), {}};
    std::size_t row = 0;
    for (int c = first; c < last; ++c) {
      for (std::size_t i = 0; i < per_class; ++i, ++row) {
        for (std::size_t d = 0; d < spec.dim; ++d) {
          ex.features(row, d) = centres(static_cast<std::size_t>(c), d) + spec.class_spread * rng.normal();
        }
        ex.labels.push_back(c);
      }
    }
    return std::make_shared<InMemorySource>(std::move(ex));
  };

  SyntheticDrift out;
  const int k = static_cast<int>(spec.classes_per_task);
  for (int t = 0; t < 2; ++t) {
    Task task;
    task.task_id = t + 1;
    for (int c = t * k; c < (t + 1) * k; ++c) task.classes.push_back(c);
    task.train = sample(spec.train_per_class, t * k, (t + 1) * k);
    task.test = sample(spec.test_per_class, t * k, (t + 1) * k);
    out.stream.tasks.push_back(std::move(task));
  }

  std::vector<double> dir(spec.dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& v : dir) v = rng.normal();
    norm = std::sqrt(std::inner_product(dir.begin(), dir.end(), dir.begin(), 0.0));
  }
  out.drift.shift.resize(spec.dim);
  for (std::size_t d = 0; d < spec.dim; ++d) out.drift.shift[d] = spec.drift * dir[d] / norm;
  return out;
}

}  // namespace eli::continuum
