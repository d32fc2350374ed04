#include "eli/continuum/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <utility>

#include "eli/dataio/pca.hpp"
#include "eli/ebm/learn.hpp"
#include "eli/numeric/errors.hpp"

namespace eli::continuum {

namespace {

using dataio::KeyValues;

std::string dataset_name(Dataset d) { return d == Dataset::synthetic ? "synthetic" : "mnist"; }

Dataset parse_dataset(const std::string& s) {
  if (s == "mnist") return Dataset::mnist;
  if (s == "synthetic") return Dataset::synthetic;
  throw ConfigError("config key 'dataset': expected mnist|synthetic, got '" + s + "'");
}

void put_train(KeyValues& kv, const std::string& prefix, const TrainConfig& t) {
  kv.set(prefix + ".epochs", std::to_string(t.epochs));
  kv.set(prefix + ".batch_size", std::to_string(t.batch_size));
  kv.set(prefix + ".lr", dataio::format_double(t.learning_rate));
  kv.set(prefix + ".momentum", dataio::format_double(t.momentum));
}

// Applies kv entries to cfg, consuming each recognised key from `pending`.
class Reader {
 public:
  explicit Reader(const KeyValues& kv) : pending_(kv.entries()) {}

  template <typename Fn>
  void take(const std::string& key, Fn&& apply) {
    const auto it = pending_.find(key);
    if (it == pending_.end()) return;
    apply(key, it->second);
    pending_.erase(it);
  }

  void size(const std::string& key, std::size_t& out) {
    take(key, [&](const auto& k, const auto& v) { out = dataio::to_size(k, v); });
  }
  void number(const std::string& key, double& out) {
    take(key, [&](const auto& k, const auto& v) { out = dataio::to_double(k, v); });
  }
  void flag(const std::string& key, bool& out) {
    take(key, [&](const auto& k, const auto& v) { out = dataio::to_bool(k, v); });
  }
  void sizes(const std::string& key, std::vector<std::size_t>& out) {
    take(key, [&](const auto& k, const auto& v) { out = dataio::to_size_list(k, v); });
  }
  void train(const std::string& prefix, TrainConfig& t) {
    size(prefix + ".epochs", t.epochs);
    size(prefix + ".batch_size", t.batch_size);
    number(prefix + ".lr", t.learning_rate);
    number(prefix + ".momentum", t.momentum);
  }

  void finish() const {
    if (!pending_.empty()) throw ConfigError("unknown config key '" + pending_.begin()->first + "'");
  }

 private:
  std::map<std::string, std::string> pending_;
};

void read_ebm(Reader& r, ebm::EbmTrainConfig& e) {
  r.size("ebm.iterations", e.iterations);
  r.size("ebm.batch_size", e.batch_size);
  r.number("ebm.lr", e.learning_rate);
  r.number("ebm.ema_decay", e.ema_decay);
  r.sizes("ebm.hidden_dims", e.hidden_dims);
  r.number("ebm.energy_reg_coeff", e.energy_reg_coeff);
  r.take("ebm.loss_sign", [&](const auto&, const auto& v) { e.loss_sign = ebm::parse_loss_sign(v); });
  r.take("ebm.hidden_activation", [&](const auto& k, const auto& v) {
    try {
      e.hidden_activation = numeric::parse_activation(v);
    } catch (const ArgumentError&) {
      throw ConfigError("config key '" + k + "': unknown activation '" + v + "'");
    }
  });
  r.number("ebm.rmsprop_decay", e.rmsprop_decay);
  r.number("ebm.rmsprop_epsilon", e.rmsprop_epsilon);
  r.size("ebm.langevin.steps", e.langevin.steps);
  r.number("ebm.langevin.step_size", e.langevin.step_size);
  r.flag("ebm.langevin.noise", e.langevin.noise_enabled);
  r.take("ebm.langevin.grad_clip", [&](const auto& k, const auto& v) {
    if (v == "off" || v == "none") {
      e.langevin.grad_clip.reset();
    } else {
      e.langevin.grad_clip = dataio::to_double(k, v);
    }
  });
}

class StageRunner {
 public:
  StageRunner(const StageObserver& observer, dataio::AlignmentReport& report)
      : observer_(observer), report_(report) {}

  template <typename Fn>
  auto operator()(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    if (observer_) observer_(stage, true);
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        done(stage, start);
      } else {
        auto result = fn();
        done(stage, start);
        return result;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, e.what());
    }
  }

 private:
  void done(const std::string& stage, std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    report_.stage_seconds.emplace_back(stage, dt.count());
    if (observer_) observer_(stage, false);
  }

  const StageObserver& observer_;
  dataio::AlignmentReport& report_;
};

// The representation the aligner acts on; logits always come from the
// previous head.
Matrix aligned_space(const ClassifierModel& prev, const MlpParams& backbone, const Matrix& x,
                     aligner::AlignSpace space) {
  Matrix z = numeric::mlp_predict(backbone, x);
  if (space == aligner::AlignSpace::logit) z = numeric::mlp_predict(prev.head, z);
  return z;
}

double percent(double fraction) { return 100.0 * fraction; }

}  // namespace

void ExperimentConfig::validate() const {
  if (latent_dim == 0) throw ConfigError("model.latent_dim must be positive");
  for (auto h : backbone_hidden) {
    if (h == 0) throw ConfigError("model.backbone_hidden entries must be positive");
  }
  base.validate();
  finetune.validate();
  ebm.validate();
  align.validate();
  if (dataset == Dataset::mnist && data_root.empty()) {
    throw ConfigError("data.root is required for the mnist dataset");
  }
  if (dataset == Dataset::synthetic) {
    if (synthetic.dim < 2) throw ConfigError("synthetic.dim must be at least 2");
    if (synthetic.dim != latent_dim) {
      throw ConfigError("synthetic.dim must equal model.latent_dim (the drift map acts on latents)");
    }
    if (synthetic.classes_per_task == 0) throw ConfigError("synthetic.classes_per_task must be positive");
    if (synthetic.train_per_class == 0 || synthetic.test_per_class == 0) {
      throw ConfigError("synthetic per-class counts must be positive");
    }
  }
}

KeyValues to_key_values(const ebm::EbmTrainConfig& e) {
  KeyValues kv;
  kv.set("ebm.iterations", std::to_string(e.iterations));
  kv.set("ebm.batch_size", std::to_string(e.batch_size));
  kv.set("ebm.lr", dataio::format_double(e.learning_rate));
  kv.set("ebm.ema_decay", dataio::format_double(e.ema_decay));
  kv.set("ebm.hidden_dims", dataio::format_size_list(e.hidden_dims));
  kv.set("ebm.energy_reg_coeff", dataio::format_double(e.energy_reg_coeff));
  kv.set("ebm.loss_sign", ebm::to_string(e.loss_sign));
  kv.set("ebm.hidden_activation", std::string(numeric::to_string(e.hidden_activation)));
  kv.set("ebm.rmsprop_decay", dataio::format_double(e.rmsprop_decay));
  kv.set("ebm.rmsprop_epsilon", dataio::format_double(e.rmsprop_epsilon));
  kv.set("ebm.langevin.steps", std::to_string(e.langevin.steps));
  kv.set("ebm.langevin.step_size", dataio::format_double(e.langevin.step_size));
  kv.set("ebm.langevin.noise", e.langevin.noise_enabled ? "true" : "false");
  kv.set("ebm.langevin.grad_clip",
         e.langevin.grad_clip ? dataio::format_double(*e.langevin.grad_clip) : "off");
  return kv;
}

ebm::EbmTrainConfig ebm_config_from_key_values(const KeyValues& kv) {
  ebm::EbmTrainConfig e;
  Reader r(kv);
  read_ebm(r, e);
  r.finish();
  return e;
}

KeyValues to_key_values(const ExperimentConfig& c) {
  KeyValues kv = to_key_values(c.ebm);
  kv.set("seed", std::to_string(c.seed));
  kv.set("dataset", dataset_name(c.dataset));
  kv.set("data.root", c.data_root);
  kv.set("data.max_train_per_task", std::to_string(c.max_train_per_task));
  kv.set("data.max_test_per_task", std::to_string(c.max_test_per_task));
  kv.set("synthetic.classes_per_task", std::to_string(c.synthetic.classes_per_task));
  kv.set("synthetic.dim", std::to_string(c.synthetic.dim));
  kv.set("synthetic.drift", dataio::format_double(c.synthetic.drift));
  kv.set("synthetic.train_per_class", std::to_string(c.synthetic.train_per_class));
  kv.set("synthetic.test_per_class", std::to_string(c.synthetic.test_per_class));
  kv.set("synthetic.class_spread", dataio::format_double(c.synthetic.class_spread));
  kv.set("model.latent_dim", std::to_string(c.latent_dim));
  kv.set("model.backbone_hidden", dataio::format_size_list(c.backbone_hidden));
  put_train(kv, "base", c.base);
  put_train(kv, "finetune", c.finetune);
  kv.set("align.l_steps", std::to_string(c.align.l_steps));
  kv.set("align.lr", dataio::format_double(c.align.learning_rate));
  kv.set("align.use_ema", c.align.use_ema ? "true" : "false");
  kv.set("align.space", aligner::to_string(c.align.space));
  kv.set("report.snapshot_rows", std::to_string(c.snapshot_rows));
  return kv;
}

ExperimentConfig from_key_values(const KeyValues& kv) {
  ExperimentConfig c;
  Reader r(kv);
  r.take("seed", [&](const auto& k, const auto& v) { c.seed = dataio::to_size(k, v); });
  r.take("dataset", [&](const auto&, const auto& v) { c.dataset = parse_dataset(v); });
  r.take("data.root", [&](const auto&, const auto& v) { c.data_root = v; });
  r.size("data.max_train_per_task", c.max_train_per_task);
  r.size("data.max_test_per_task", c.max_test_per_task);
  r.size("synthetic.classes_per_task", c.synthetic.classes_per_task);
  r.size("synthetic.dim", c.synthetic.dim);
  r.number("synthetic.drift", c.synthetic.drift);
  r.size("synthetic.train_per_class", c.synthetic.train_per_class);
  r.size("synthetic.test_per_class", c.synthetic.test_per_class);
  r.number("synthetic.class_spread", c.synthetic.class_spread);
  r.size("model.latent_dim", c.latent_dim);
  r.take("model.backbone_hidden", [&](const auto& k, const auto& v) {
    c.backbone_hidden = v.empty() || v == "none" ? std::vector<std::size_t>{}
                                                 : dataio::to_size_list(k, v);
  });
  r.train("base", c.base);
  r.train("finetune", c.finetune);
  read_ebm(r, c.ebm);
  r.size("align.l_steps", c.align.l_steps);
  r.number("align.lr", c.align.learning_rate);
  r.flag("align.use_ema", c.align.use_ema);
  r.take("align.space", [&](const auto&, const auto& v) { c.align.space = aligner::parse_align_space(v); });
  r.size("report.snapshot_rows", c.snapshot_rows);
  r.finish();
  return c;
}

ExperimentResult run_eli_experiment(const ExperimentConfig& cfg, const TaskStream& stream,
                                    const std::optional<DriftMap>& drift,
                                    const StageObserver& observer) {
  cfg.validate();
  ExperimentResult result;
  dataio::AlignmentReport& report = result.report;
  report.config = to_key_values(cfg);
  report.seed = cfg.seed;
  StageRunner stage(observer, report);

  numeric::Rng master(cfg.seed);
  numeric::Rng rng_base = master.split(2);
  numeric::Rng rng_drift = master.split(3);
  numeric::Rng rng_ebm = master.split(4);

  const Task& t1 = stream.task(1);
  const Task& t2 = stream.task(2);
  const aligner::AlignSpace space = cfg.align.space;

  result.previous = stage("train_base", [&] {
    return train_base(t1, cfg.latent_dim, cfg.backbone_hidden, cfg.base, rng_base).model;
  });
  const ClassifierModel& prev = result.previous;

  report.accuracy.pre_drift = stage("evaluate_pre_drift", [&] {
    return percent(evaluate(prev.head, prev.backbone, {}, *t1.test, t1));
  });

  result.current = stage("finetune", [&] {
    if (drift) {
      return ClassifierModel{apply_drift(prev.backbone, *drift),
                             init_head(rng_drift, cfg.latent_dim, t2.classes.size())};
    }
    return continuum::finetune(prev, t2, cfg.finetune, rng_drift).model;
  });
  const ClassifierModel& curr = result.current;

  // Only task-2 inputs reach the energy model, seen through both backbones.
  auto pool = stage("extract_latents", [&] {
    const Matrix x2 = t2.train->read_all().features;
    return ebm::PairedLatentPool(aligned_space(prev, prev.backbone, x2, space),
                                 aligned_space(prev, curr.backbone, x2, space));
  });

  result.energy = stage("learn_ebm", [&] {
    ebm::EnergyModel m = ebm::learn_ebm(pool, cfg.ebm, rng_ebm);
    report.energy.mean_in = numeric::mean(ebm::energy(m, pool.prev(), cfg.align.use_ema));
    report.energy.mean_out = numeric::mean(ebm::energy(m, pool.curr(), cfg.align.use_ema));
    return m;
  });
  const ebm::EnergyModel& energy = result.energy;

  stage("evaluate", [&] {
    const LatentAligner aligner{&energy, cfg.align};
    report.accuracy.drifted = percent(evaluate(prev.head, curr.backbone, {}, *t1.test, t1));
    report.accuracy.aligned = percent(evaluate(prev.head, curr.backbone, aligner, *t1.test, t1));
    report.eval_examples = t1.test->size();

    const Matrix z = aligned_space(prev, curr.backbone, t1.test->read_all().features, space);
    const aligner::AlignTrace trace = aligner::align_energy_trace(energy, z, cfg.align);
    double before = 0.0, after = 0.0;
    for (std::size_t r = 0; r < z.rows(); ++r) {
      before += trace.trace(r, 0);
      after += trace.trace(r, cfg.align.l_steps);
    }
    report.energy.mean_before_align = before / static_cast<double>(z.rows());
    report.energy.mean_after_align = after / static_cast<double>(z.rows());
  });

  stage("snapshot", [&] {
    const Examples e1 = t1.test->read_range(0, std::min(cfg.snapshot_rows, t1.test->size()));
    const Examples e2 = t2.test->read_range(0, std::min(cfg.snapshot_rows, t2.test->size()));
    const Matrix z1 = aligned_space(prev, curr.backbone, e1.features, space);
    const Matrix z2 = aligned_space(prev, curr.backbone, e2.features, space);
    const aligner::AlignTrace trace = aligner::align_energy_trace(energy, z1, cfg.align, true);
    report.energy_trace = trace.trace;
    report.dim_delta = aligner::per_dimension_delta(z1, trace.steps);

    // Task gating: only task-1 rows are aligned.
    const Matrix before = numeric::concat_rows(z1, z2);
    const Matrix after = numeric::concat_rows(trace.aligned, z2);
    const dataio::PcaBasis basis = dataio::fit_pca(numeric::concat_rows(before, after), 2);
    std::vector<int> labels = e1.labels;
    labels.insert(labels.end(), e2.labels.begin(), e2.labels.end());
    std::vector<int> tasks(e1.labels.size(), t1.task_id);
    tasks.resize(labels.size(), t2.task_id);
    report.before = {dataio::project(basis, before), labels, tasks};
    report.after = {dataio::project(basis, after), labels, tasks};
  });
  return result;
}

ExperimentResult run_eli_experiment(const ExperimentConfig& cfg, const StageObserver& observer) {
  cfg.validate();
  std::optional<DriftMap> drift;
  TaskStream stream;
  {
    const std::string name = "load_data";
    if (observer) observer(name, true);
    try {
      if (cfg.dataset == Dataset::synthetic) {
        numeric::Rng rng_data = numeric::Rng(cfg.seed).split(1);
        SyntheticDrift s = build_synthetic_drift(rng_data, cfg.synthetic);
        stream = std::move(s.stream);
        drift = std::move(s.drift);
      } else {
        stream = build_two_task_mnist(cfg.data_root, cfg.max_train_per_task, cfg.max_test_per_task);
      }
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
    if (observer) observer(name, false);
  }
  return run_eli_experiment(cfg, stream, drift, observer);
}

}  // namespace eli::continuum
