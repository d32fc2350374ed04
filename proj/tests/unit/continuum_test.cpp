#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "eli/continuum/classifier.hpp"
#include "eli/continuum/experiment.hpp"
#include "eli/continuum/task.hpp"
#include "eli/numeric/errors.hpp"
#include "support/temp_dir.hpp"

namespace {

namespace fs = std::filesystem;
using namespace eli::continuum;
using eli::numeric::Matrix;
using eli::numeric::MlpParams;
using eli::numeric::Rng;

Task tiny_task(int id, std::vector<int> classes, Examples train, Examples test) {
  Task t;
  t.task_id = id;
  t.classes = std::move(classes);
  t.train = std::make_shared<InMemorySource>(std::move(train));
  t.test = std::make_shared<InMemorySource>(std::move(test));
  return t;
}

Examples labelled(Matrix x, std::vector<int> y) { return Examples{std::move(x), std::move(y)}; }

// Identity backbone on 2-D inputs, so the head decides alone.
MlpParams identity_backbone(std::size_t dim) {
  MlpParams p;
  eli::numeric::DenseLayer l;
  l.weight = Matrix::identity(dim);
  l.bias.assign(dim, 0.0);
  l.activation = eli::numeric::Activation::identity;
  p.layers.push_back(std::move(l));
  return p;
}

MlpParams linear_head(Matrix w, std::vector<double> b) {
  MlpParams p;
  eli::numeric::DenseLayer l;
  l.weight = std::move(w);
  l.bias = std::move(b);
  p.layers.push_back(std::move(l));
  return p;
}

// ---- sources and tasks ----

TEST(Task, SourceReadsSelectedRows) {
  InMemorySource src(labelled(Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}}), {7, 8, 9}));
  const std::vector<std::size_t> idx{2, 0};
  const Examples e = src.read(idx);
  EXPECT_EQ(e.labels, (std::vector<int>{9, 7}));
  EXPECT_EQ(e.features(0, 1), 6.0);
  EXPECT_EQ(src.read_range(1, 3).labels, (std::vector<int>{8, 9}));
  const std::vector<std::size_t> bad{3};
  EXPECT_THROW(src.read(bad), eli::ShapeError);
}

TEST(Task, LocalLabelAndLookup) {
  TaskStream s;
  s.tasks.push_back(tiny_task(1, {0, 1}, labelled(Matrix(1, 1), {1}), labelled(Matrix(1, 1), {0})));
  s.tasks.push_back(tiny_task(2, {5, 6}, labelled(Matrix(1, 1), {6}), labelled(Matrix(1, 1), {5})));
  EXPECT_EQ(s.task(2).local_label(6), 1u);
  EXPECT_THROW(s.task(1).local_label(6), eli::DataError);
  EXPECT_THROW(s.task(3), eli::ArgumentError);
  EXPECT_NO_THROW(validate(s));
}

TEST(Task, ValidateRejectsOverlapAndStrayLabels) {
  TaskStream overlap;
  overlap.tasks.push_back(tiny_task(1, {0, 1}, labelled(Matrix(1, 1), {0}), labelled(Matrix(1, 1), {0})));
  overlap.tasks.push_back(tiny_task(2, {1, 2}, labelled(Matrix(1, 1), {2}), labelled(Matrix(1, 1), {2})));
  EXPECT_THROW(validate(overlap), eli::DataError);

  TaskStream stray;
  stray.tasks.push_back(tiny_task(1, {0, 1}, labelled(Matrix(1, 1), {3}), labelled(Matrix(1, 1), {0})));
  EXPECT_THROW(validate(stray), eli::DataError);
}

TEST(Task, SplitByClassesKeepsFileOrderAndCaps) {
  const Examples pool = labelled(Matrix::from_rows({{0}, {1}, {2}, {3}, {4}, {5}}), {0, 5, 1, 6, 0, 5});
  const auto parts = split_by_classes(pool, {{0, 1}, {5, 6}}, 2);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0]->read_all().labels, (std::vector<int>{0, 1}));
  EXPECT_EQ(parts[1]->read_all().labels, (std::vector<int>{5, 6}));
  EXPECT_EQ(parts[1]->read_all().features(1, 0), 3.0);
}

fs::path mnist_root() {
  if (const char* env = std::getenv("ELI_DATA_ROOT")) return env;
  return "/root/data/mnist";
}

TEST(Task, TwoTaskMnistCounts) {
  const auto root = mnist_root();
  if (!fs::exists(root / "train-images-idx3-ubyte")) GTEST_SKIP() << "no MNIST under " << root;
  const TaskStream s = build_two_task_mnist(root);
  ASSERT_EQ(s.tasks.size(), 2u);
  EXPECT_EQ(s.task(1).classes, (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(s.task(2).classes, (std::vector<int>{5, 6, 7, 8, 9}));
  EXPECT_EQ(s.task(1).train->size(), 30596u);
  EXPECT_EQ(s.task(2).train->size(), 29404u);
  EXPECT_EQ(s.task(1).test->size(), 5139u);
  EXPECT_EQ(s.task(2).test->size(), 4861u);
  EXPECT_EQ(s.task(1).train->feature_dim(), 784u);
  const Examples e = s.task(2).test->read_range(0, 50);
  for (double v : e.features.values()) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(Task, MnistMissingDirectoryIsIoError) {
  eli::testing_support::TempDir dir;
  EXPECT_THROW(build_two_task_mnist(dir / "absent"), eli::IoError);
  EXPECT_THROW(build_two_task_mnist(dir.path()), eli::IoError);
}

// ---- synthetic drift ----

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

TEST(Synthetic, DriftLengthMatchesSpec) {
  for (double d : {0.0, 0.5, 25.0}) {
    Rng rng(4);
    SyntheticSpec spec;
    spec.drift = d;
    const SyntheticDrift s = build_synthetic_drift(rng, spec);
    ASSERT_EQ(s.drift.shift.size(), spec.dim);
    EXPECT_NEAR(norm(s.drift.shift), d, 1e-12);
  }
}

TEST(Synthetic, ShapeAndDeterminism) {
  SyntheticSpec spec;
  spec.classes_per_task = 3;
  spec.dim = 6;
  spec.train_per_class = 10;
  spec.test_per_class = 4;
  spec.drift = 1.0;
  Rng a(9), b(9), c(10);
  const auto x = build_synthetic_drift(a, spec);
  const auto y = build_synthetic_drift(b, spec);
  const auto z = build_synthetic_drift(c, spec);
  EXPECT_NO_THROW(validate(x.stream));
  EXPECT_EQ(x.stream.task(1).train->size(), 30u);
  EXPECT_EQ(x.stream.task(2).test->size(), 12u);
  EXPECT_EQ(x.stream.task(2).classes, (std::vector<int>{3, 4, 5}));
  EXPECT_EQ(x.stream.task(1).train->read_all().features.values(),
            y.stream.task(1).train->read_all().features.values());
  EXPECT_EQ(x.drift.shift, y.drift.shift);
  EXPECT_NE(x.drift.shift, z.drift.shift);
}

// ---- classifier ----

TEST(Classifier, ApplyDriftShiftsOutputExactly) {
  Rng rng(1);
  const MlpParams bb = init_backbone(rng, 5, {4}, 3);
  const DriftMap d{{0.5, -1.0, 2.0}};
  const Matrix x = eli::numeric::gaussian(rng, 7, 5);
  const Matrix z0 = eli::numeric::mlp_predict(bb, x);
  const Matrix z1 = eli::numeric::mlp_predict(apply_drift(bb, d), x);
  for (std::size_t r = 0; r < 7; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(z1(r, c) - z0(r, c), d.shift[c], 1e-12);
  }
  EXPECT_THROW(apply_drift(bb, DriftMap{{1.0}}), eli::ShapeError);
}

TEST(Classifier, ValidateCatchesHeadMismatch) {
  Rng rng(2);
  ClassifierModel m{init_backbone(rng, 4, {3}, 2), init_head(rng, 3, 2)};
  EXPECT_THROW(validate(m), eli::ShapeError);
}

TEST(Classifier, ExtractLatentsKeepsRowsAndTags) {
  Rng rng(3);
  const MlpParams bb = init_backbone(rng, 6, {5}, 4);
  const Matrix x = eli::numeric::gaussian(rng, 9, 6);
  const auto batch = extract_latents(bb, x, eli::ebm::LatentOrigin::curr_model, 2);
  EXPECT_EQ(batch.size(), 9u);
  EXPECT_EQ(batch.dim(), 4u);
  EXPECT_EQ(batch.latents.values(), eli::numeric::mlp_predict(bb, x).values());
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(batch.origin[i], eli::ebm::LatentOrigin::curr_model);
    EXPECT_EQ(batch.task_id[i], 2);
  }
  const auto identity = extract_latents(identity_backbone(6), x, eli::ebm::LatentOrigin::prev_model);
  EXPECT_EQ(identity.latents.values(), x.values());
  EXPECT_FALSE(identity.task_id[0].has_value());
}

TEST(Classifier, ArgmaxFirstWinsTies) {
  const Matrix m = Matrix::from_rows({{1, 3, 3}, {5, 5, 5}, {-1, -2, 0}});
  EXPECT_EQ(argmax_rows(m), (std::vector<std::size_t>{1, 0, 2}));
}

Task two_point_task() {
  return tiny_task(1, {0, 1}, labelled(Matrix::from_rows({{1, 0}, {0, 1}}), {0, 1}),
                   labelled(Matrix::from_rows({{1, 0}, {0, 1}, {2, 0}, {0, 3}}), {0, 1, 0, 1}));
}

TEST(Evaluate, PerfectAndInverted) {
  const Task t = two_point_task();
  const MlpParams bb = identity_backbone(2);
  EXPECT_DOUBLE_EQ(evaluate(linear_head(Matrix::identity(2), {0, 0}), bb, {}, *t.test, t), 1.0);
  EXPECT_DOUBLE_EQ(
      evaluate(linear_head(Matrix::from_rows({{0, 1}, {1, 0}}), {0, 0}), bb, {}, *t.test, t), 0.0);
}

TEST(Evaluate, ConstantPredictorScoresClassShare) {
  const Task t = tiny_task(1, {0, 1, 2}, labelled(Matrix(1, 2), {0}),
                           labelled(Matrix(8, 2), {0, 1, 1, 2, 1, 0, 1, 2}));
  const MlpParams head = linear_head(Matrix(3, 2), {0.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(evaluate(head, identity_backbone(2), {}, *t.test, t), 4.0 / 8.0);
}

TEST(Evaluate, InvariantToMonotoneLogitRescaling) {
  Rng rng(6);
  const Task t = tiny_task(1, {0, 1, 2, 3}, labelled(Matrix(1, 5), {0}), [&] {
    Examples e{eli::numeric::gaussian(rng, 60, 5), {}};
    for (int i = 0; i < 60; ++i) e.labels.push_back(i % 4);
    return e;
  }());
  const MlpParams bb = init_backbone(rng, 5, {6}, 3);
  MlpParams head = init_head(rng, 3, 4);
  const double base = evaluate(head, bb, {}, *t.test, t);
  for (auto& w : head.layers[0].weight.data()) w *= 3.5;
  for (auto& b : head.layers[0].bias) b *= 3.5;
  EXPECT_DOUBLE_EQ(evaluate(head, bb, {}, *t.test, t), base);
  for (auto& b : head.layers[0].bias) b += 10.0;  // same offset on every logit
  EXPECT_DOUBLE_EQ(evaluate(head, bb, {}, *t.test, t), base);
}

TEST(Evaluate, RandomHeadNearChance) {
  Rng rng(8);
  SyntheticSpec spec;
  spec.classes_per_task = 5;
  spec.test_per_class = 400;
  const SyntheticDrift s = build_synthetic_drift(rng, spec);
  const Task& t1 = s.stream.task(1);
  double total = 0.0;
  const int heads = 20;
  for (int i = 0; i < heads; ++i) {
    total += evaluate(init_head(rng, spec.dim, 5), identity_backbone(spec.dim), {}, *t1.test, t1);
  }
  EXPECT_NEAR(total / heads, 0.2, 0.08);
}

TEST(Evaluate, EmptySplitIsArgumentError) {
  const Task t = tiny_task(1, {0, 1}, labelled(Matrix(1, 2), {0}), labelled(Matrix(0, 2), {}));
  EXPECT_THROW(evaluate(linear_head(Matrix::identity(2), {0, 0}), identity_backbone(2), {}, *t.test, t),
               eli::ArgumentError);
}

TEST(Evaluate, AlignerWithZeroStepsChangesNothing) {
  Rng rng(12);
  const Task t = two_point_task();
  const auto energy = eli::ebm::init_energy_model(rng, 2, eli::ebm::EbmTrainConfig{});
  LatentAligner a{&energy, {}};
  a.config.l_steps = 0;
  const MlpParams head = linear_head(Matrix::identity(2), {0, 0});
  const Matrix x = t.test->read_all().features;
  EXPECT_EQ(predict_logits(head, identity_backbone(2), a, x).values(),
            predict_logits(head, identity_backbone(2), {}, x).values());
  a.config.space = eli::aligner::AlignSpace::logit;
  EXPECT_EQ(predict_logits(head, identity_backbone(2), a, x).values(),
            predict_logits(head, identity_backbone(2), {}, x).values());
}

TEST(Train, MemorizesSingleExample) {
  Rng rng(13);
  const Task t = tiny_task(1, {0, 1, 2}, labelled(Matrix::from_rows({{0.3, -0.2, 0.9, 0.1}}), {2}),
                           labelled(Matrix::from_rows({{0.3, -0.2, 0.9, 0.1}}), {2}));
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 1;
  const TrainOutcome out = train_base(t, 3, {8}, cfg, rng);
  ASSERT_EQ(out.epoch_loss.size(), 60u);
  EXPECT_LT(out.epoch_loss.back(), 0.01);
  EXPECT_LT(out.epoch_loss.back(), out.epoch_loss.front());
  EXPECT_DOUBLE_EQ(out.train_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(evaluate(out.model.head, out.model.backbone, {}, *t.test, t), 1.0);
}

TEST(Train, LearnsSeparableClusters) {
  Rng rng(14);
  SyntheticSpec spec;
  spec.dim = 8;
  const SyntheticDrift s = build_synthetic_drift(rng, spec);
  TrainConfig cfg;
  cfg.epochs = 5;
  const TrainOutcome out = train_base(s.stream.task(1), 4, {16}, cfg, rng);
  const Task& t1 = s.stream.task(1);
  EXPECT_GT(evaluate(out.model.head, out.model.backbone, {}, *t1.test, t1), 0.95);
}

TEST(Train, ZeroEpochFinetuneKeepsBackbone) {
  Rng rng(15);
  const Task t = two_point_task();
  const ClassifierModel m{init_backbone(rng, 2, {4}, 3), init_head(rng, 3, 2)};
  TrainConfig cfg;
  cfg.epochs = 0;
  const TrainOutcome out = finetune(m, t, cfg, rng);
  EXPECT_TRUE(out.model.backbone == m.backbone);
  EXPECT_FALSE(out.model.head == m.head);  // fresh head
  EXPECT_TRUE(out.epoch_loss.empty());
}

TEST(Train, FinetuneLeavesInputUntouched) {
  Rng rng(16);
  const Task t = two_point_task();
  const ClassifierModel m{init_backbone(rng, 2, {4}, 3), init_head(rng, 3, 2)};
  const ClassifierModel copy = m;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  const TrainOutcome out = finetune(m, t, cfg, rng);
  EXPECT_TRUE(m == copy);
  EXPECT_FALSE(out.model.backbone == m.backbone);
}

TEST(Train, DivergenceIsNumericError) {
  Rng rng(17);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const Task t = tiny_task(1, {0, 1}, labelled(Matrix::from_rows({{0.5, 0.5}, {nan, 1.0}}), {0, 1}),
                           labelled(Matrix(1, 2), {0}));
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  EXPECT_THROW(train_base(t, 2, {3}, cfg, rng), eli::NumericError);
}

TEST(Train, ConfigValidation) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), eli::ConfigError);
  cfg = {};
  cfg.momentum = 1.0;
  EXPECT_THROW(cfg.validate(), eli::ConfigError);
}

// ---- experiment configuration ----

TEST(ExperimentConfig, KeyValuesRoundTrip) {
  ExperimentConfig c;
  c.seed = 77;
  c.dataset = Dataset::synthetic;
  c.latent_dim = 16;
  c.synthetic.dim = 16;
  c.synthetic.drift = 2.5;
  c.ebm.learning_rate = 3e-4;
  c.ebm.langevin.grad_clip.reset();
  c.ebm.hidden_dims = {32, 16, 8};
  c.align.space = eli::aligner::AlignSpace::logit;
  c.align.use_ema = false;
  const auto kv = to_key_values(c);
  const ExperimentConfig back = from_key_values(kv);
  EXPECT_EQ(to_key_values(back).to_text(), kv.to_text());
  EXPECT_EQ(back.ebm, c.ebm);
  EXPECT_EQ(back.align, c.align);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(kv.at("ebm.langevin.grad_clip"), "off");
}

TEST(ExperimentConfig, UnknownKeyNamed) {
  eli::dataio::KeyValues kv;
  kv.set("ebm.iterationz", "3");
  try {
    from_key_values(kv);
    FAIL() << "no ConfigError";
  } catch (const eli::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ebm.iterationz"), std::string::npos);
  }
}

TEST(ExperimentConfig, BadValuesRejected) {
  eli::dataio::KeyValues kv;
  kv.set("align.space", "pixels");
  EXPECT_THROW(from_key_values(kv), eli::ConfigError);
  kv = {};
  kv.set("dataset", "synthetic");
  kv.set("synthetic.dim", "8");  // latent_dim stays 32
  EXPECT_THROW(from_key_values(kv).validate(), eli::ConfigError);
  ExperimentConfig mnist;
  mnist.data_root.clear();
  EXPECT_THROW(mnist.validate(), eli::ConfigError);
}

// ---- experiment pipeline ----

// Counts reads of one split and remembers which stage was active for each.
class CountingSource final : public ExampleSource {
 public:
  CountingSource(std::shared_ptr<const ExampleSource> inner, const std::string* stage)
      : inner_(std::move(inner)), stage_(stage) {}

  std::size_t size() const override { return inner_->size(); }
  std::size_t feature_dim() const override { return inner_->feature_dim(); }
  Examples read(std::span<const std::size_t> indices) const override {
    std::lock_guard<std::mutex> lock(mu_);
    reads_[*stage_] += indices.size();
    return inner_->read(indices);
  }
  std::map<std::string, std::size_t> reads() const {
    std::lock_guard<std::mutex> lock(mu_);
    return reads_;
  }

 private:
  std::shared_ptr<const ExampleSource> inner_;
  const std::string* stage_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::size_t> reads_;
};

ExperimentConfig small_synthetic(std::uint64_t seed, double drift) {
  ExperimentConfig c;
  c.seed = seed;
  c.dataset = Dataset::synthetic;
  c.latent_dim = 8;
  c.synthetic.dim = 8;
  c.synthetic.drift = drift;
  c.synthetic.train_per_class = 60;
  c.synthetic.test_per_class = 30;
  c.backbone_hidden = {16};
  c.base.epochs = 3;
  c.ebm.iterations = 40;
  c.ebm.batch_size = 32;
  c.ebm.hidden_dims = {16, 16};
  c.ebm.langevin.steps = 5;
  c.align.l_steps = 5;
  c.snapshot_rows = 20;
  return c;
}

TEST(Experiment, TaskOneTrainingDataOnlyReadByBaseTraining) {
  ExperimentConfig cfg = small_synthetic(3, 1.0);
  Rng rng_data = Rng(cfg.seed).split(1);
  SyntheticDrift s = build_synthetic_drift(rng_data, cfg.synthetic);
  std::string current = "none";
  auto counting = std::make_shared<CountingSource>(s.stream.tasks[0].train, &current);
  s.stream.tasks[0].train = counting;

  std::vector<std::string> order;
  const StageObserver observer = [&](const std::string& stage, bool begin) {
    if (begin) {
      current = stage;
      order.push_back(stage);
    } else {
      current = "none";
    }
  };
  run_eli_experiment(cfg, s.stream, s.drift, observer);

  const auto reads = counting->reads();
  EXPECT_GT(reads.count("train_base") ? reads.at("train_base") : 0u, 0u);
  for (const auto& [stage, n] : reads) {
    EXPECT_EQ(stage, "train_base") << n << " task-1 train reads during " << stage;
  }
  EXPECT_EQ(order, (std::vector<std::string>{"train_base", "evaluate_pre_drift", "finetune",
                                             "extract_latents", "learn_ebm", "evaluate", "snapshot"}));
}

TEST(Experiment, SyntheticRunFillsReport) {
  const ExperimentConfig cfg = small_synthetic(5, 2.0);
  const ExperimentResult r = run_eli_experiment(cfg);
  const auto& rep = r.report;
  for (double a : {rep.accuracy.pre_drift, rep.accuracy.drifted, rep.accuracy.aligned}) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 100.0);
  }
  EXPECT_EQ(rep.eval_examples, 5u * 30u);
  EXPECT_EQ(rep.dim_delta.rows(), 8u);
  EXPECT_EQ(rep.dim_delta.cols(), 5u);
  EXPECT_EQ(rep.energy_trace.rows(), 20u);
  EXPECT_EQ(rep.energy_trace.cols(), 6u);
  EXPECT_EQ(rep.before.xy.rows(), 40u);
  EXPECT_EQ(rep.after.label.size(), 40u);
  EXPECT_EQ(rep.config.at("seed"), "5");
  ASSERT_FALSE(rep.stage_seconds.empty());
  EXPECT_EQ(rep.stage_seconds.front().first, "train_base");
  // Task-2 rows are never aligned.
  for (std::size_t i = 20; i < 40; ++i) {
    EXPECT_EQ(rep.before.xy(i, 0), rep.after.xy(i, 0));
    EXPECT_EQ(rep.before.task[i], 2);
  }
}

TEST(Experiment, SameSeedSameNumbers) {
  const ExperimentConfig cfg = small_synthetic(6, 1.5);
  const auto a = run_eli_experiment(cfg).report;
  const auto b = run_eli_experiment(cfg).report;
  EXPECT_EQ(a.accuracy.aligned, b.accuracy.aligned);
  EXPECT_EQ(a.energy.mean_after_align, b.energy.mean_after_align);
  EXPECT_EQ(a.dim_delta.values(), b.dim_delta.values());
}

TEST(Experiment, FailingStageIsNamed) {
  ExperimentConfig cfg = small_synthetic(7, 1.0);
  cfg.dataset = Dataset::mnist;
  cfg.data_root = "/nonexistent/eli-data";
  try {
    run_eli_experiment(cfg);
    FAIL() << "no StageError";
  } catch (const eli::StageError& e) {
    EXPECT_NE(std::string(e.what()).find("load_data"), std::string::npos) << e.what();
  }
}

}  // namespace
