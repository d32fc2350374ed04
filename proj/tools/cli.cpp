#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "eli/continuum/experiment.hpp"
#include "eli/dataio/checkpoint.hpp"
#include "eli/dataio/report.hpp"
#include "eli/numeric/errors.hpp"
#include "eli/numeric/rng.hpp"

namespace eli::cli {

namespace fs = std::filesystem;
using continuum::ExperimentConfig;
using dataio::KeyValues;

namespace {

// Keys read by the command line layer itself; never echoed into reports.
constexpr const char* kOutputDir = "output.dir";
constexpr const char* kOutputCheckpoints = "output.checkpoints";
constexpr const char* kSweepAxis = "sweep.axis";
constexpr const char* kSweepValues = "sweep.values";
constexpr const char* kSweepParallel = "sweep.parallel";

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string data_root;
  std::string out_dir;
  std::vector<std::string> sets;
};

void add_common(CLI::App& cmd, CommonOptions& o) {
  cmd.add_option("-c,--config", o.config_path, "Config file (key = value lines)")->required();
  cmd.add_option("--seed", o.seed, "Master seed (config key: seed)");
  cmd.add_option("--data-root", o.data_root, "MNIST IDX directory (config key: data.root)");
  cmd.add_option("-o,--out", o.out_dir, "Output directory (config key: output.dir)");
  cmd.add_option("--set", o.sets, "Override a config key, key=value; repeatable");
}

// Config file, then command-line flags, then --set assignments.
KeyValues effective_kv(const CommonOptions& o) {
  KeyValues kv = KeyValues::load(o.config_path);
  if (o.seed) kv.set("seed", std::to_string(*o.seed));
  if (!o.data_root.empty()) kv.set("data.root", o.data_root);
  if (!o.out_dir.empty()) kv.set(kOutputDir, o.out_dir);
  for (const auto& s : o.sets) kv.set_assignment(s);
  return kv;
}

// Splits off the command-line-only keys.
KeyValues take_cli_keys(KeyValues& kv) {
  KeyValues cli, rest;
  for (const auto& [k, v] : kv.entries()) {
    if (k.rfind("output.", 0) == 0 || k.rfind("sweep.", 0) == 0) {
      cli.set(k, v);
    } else {
      rest.set(k, v);
    }
  }
  for (const auto& [k, v] : cli.entries()) {
    if (k != kOutputDir && k != kOutputCheckpoints && k != kSweepAxis && k != kSweepValues &&
        k != kSweepParallel) {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
  kv = std::move(rest);
  return cli;
}

std::string cli_value(const KeyValues& cli, const char* key, const std::string& fallback) {
  return cli.contains(key) ? cli.at(key) : fallback;
}

ExperimentConfig experiment_config(const KeyValues& kv) {
  ExperimentConfig cfg = continuum::from_key_values(kv);
  if (cfg.data_root.empty()) {
    if (const char* env = std::getenv("ELI_DATA_ROOT")) cfg.data_root = env;
  }
  cfg.validate();
  return cfg;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Stage progress on err, serialized across threads.
class Progress {
 public:
  explicit Progress(std::ostream& err) : err_(err) {}

  continuum::StageObserver observer(std::string tag) {
    return [this, tag = std::move(tag), start = std::make_shared<Clock::time_point>()](
               const std::string& stage, bool begin) {
      std::lock_guard<std::mutex> lock(mu_);
      if (begin) {
        *start = Clock::now();
        err_ << tag << ' ' << stage << " ..." << std::endl;
      } else {
        const double s = std::chrono::duration<double>(Clock::now() - *start).count();
        err_ << tag << ' ' << stage << " done in " << fixed2(s) << " s" << std::endl;
      }
    };
  }

  void line(const std::string& text) {
    std::lock_guard<std::mutex> lock(mu_);
    err_ << text << std::endl;
  }

 private:
  using Clock = std::chrono::steady_clock;
  std::ostream& err_;
  std::mutex mu_;
};

void save_checkpoints(const continuum::ExperimentResult& r, const fs::path& dir) {
  const std::string cfg_text = r.report.config.to_text();
  dataio::save_checkpoint(r.previous, cfg_text, dir / "previous.ckpt");
  dataio::save_checkpoint(r.current, cfg_text, dir / "current.ckpt");
  dataio::save_checkpoint(r.energy, dir / "energy.ckpt");
}

int cmd_run(const CommonOptions& o, bool checkpoints_flag, std::ostream& out, std::ostream& err) {
  KeyValues kv = effective_kv(o);
  const KeyValues cli = take_cli_keys(kv);
  const ExperimentConfig cfg = experiment_config(kv);
  const fs::path dir = cli_value(cli, kOutputDir, "eli_report");
  const bool checkpoints =
      checkpoints_flag || dataio::to_bool(kOutputCheckpoints, cli_value(cli, kOutputCheckpoints, "false"));

  Progress progress(err);
  const auto result = continuum::run_eli_experiment(cfg, progress.observer("[seed " + std::to_string(cfg.seed) + "]"));
  dataio::write_report(result.report, dir);
  if (checkpoints) save_checkpoints(result, dir);

  const auto& a = result.report.accuracy;
  out << "pre_drift=" << fixed2(a.pre_drift) << " drifted=" << fixed2(a.drifted)
      << " aligned=" << fixed2(a.aligned) << '\n';
  out << "report=" << dir.string() << '\n';
  return kOk;
}

std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> values;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("sweep values contain an empty entry");
    values.push_back(item.substr(b, e - b + 1));
  }
  return values;
}

// Directory-safe form of a sweep value.
std::string path_token(const std::string& value) {
  std::string t = value;
  for (char& c : t) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
  }
  return t;
}

struct SweepPoint {
  std::string value;
  ExperimentConfig cfg;
  fs::path dir;
  dataio::Accuracies accuracy;
  std::string failure;
};

int cmd_sweep(const CommonOptions& o, const std::string& axis_flag,
              const std::optional<std::string>& values_flag, std::optional<std::size_t> parallel_flag,
              std::ostream& out, std::ostream& err) {
  KeyValues kv = effective_kv(o);
  if (!axis_flag.empty()) kv.set(kSweepAxis, axis_flag);
  if (values_flag) kv.set(kSweepValues, *values_flag);
  if (parallel_flag) kv.set(kSweepParallel, std::to_string(*parallel_flag));
  const KeyValues cli = take_cli_keys(kv);

  if (!cli.contains(kSweepAxis)) throw ConfigError("sweep needs --axis (config key: sweep.axis)");
  const std::string axis = cli.at(kSweepAxis);
  const std::string key = sweep_axis_key(axis);
  const std::string values_text = cli_value(cli, kSweepValues, "");
  if (values_text.find_first_not_of(" \t") == std::string::npos) {
    throw ConfigError("sweep needs at least one value (--values, config key: sweep.values)");
  }
  const std::vector<std::string> values = split_values(values_text);
  const std::size_t parallel = dataio::to_size(kSweepParallel, cli_value(cli, kSweepParallel, "1"));
  if (parallel == 0) throw ConfigError("sweep.parallel must be positive");
  const fs::path root = cli_value(cli, kOutputDir, "eli_sweep");

  // Every point is configured before anything runs, so config errors exit early.
  const ExperimentConfig base = experiment_config(kv);
  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < values.size(); ++i) {
    KeyValues point_kv = kv;
    std::string v = values[i];
    if (axis == "ebm_hidden_dims") std::replace(v.begin(), v.end(), 'x', ',');
    point_kv.set(key, v);
    point_kv.set("seed", std::to_string(sweep_point_seed(base.seed, i)));
    SweepPoint p;
    p.value = values[i];
    p.cfg = experiment_config(point_kv);
    p.dir = root / (axis + "_" + std::to_string(i) + "_" + path_token(values[i]));
    points.push_back(std::move(p));
  }

  // The MNIST stream is shared read-only by all points; synthetic data is
  // seed-dependent and built per point.
  std::optional<continuum::TaskStream> shared;
  Progress progress(err);
  if (base.dataset == continuum::Dataset::mnist) {
    progress.line("[sweep] loading MNIST from " + base.data_root);
    try {
      shared = continuum::build_two_task_mnist(base.data_root, base.max_train_per_task,
                                               base.max_test_per_task);
    } catch (const Error& e) {
      throw StageError("load_data", e.what());
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      SweepPoint& p = points[i];
      const std::string tag = "[" + axis + "=" + p.value + "]";
      try {
        const auto observer = progress.observer(tag);
        const auto result = shared ? continuum::run_eli_experiment(p.cfg, *shared, {}, observer)
                                   : continuum::run_eli_experiment(p.cfg, observer);
        dataio::write_report(result.report, p.dir);
        p.accuracy = result.report.accuracy;
      } catch (const std::exception& e) {
        p.failure = e.what();
        progress.line(tag + " failed: " + p.failure);
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < std::min(parallel, points.size()); ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  fs::create_directories(root);
  const fs::path csv = root / "sweep.csv";
  std::ofstream f(csv, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + csv.string());
  f << "value,drifted,aligned\n";
  int code = kOk;
  for (const auto& p : points) {
    if (!p.failure.empty()) {
      err << "point " << axis << "=" << p.value << " failed: " << p.failure << '\n';
      code = kStageFailure;
      continue;
    }
    f << p.value << ',' << g6(p.accuracy.drifted) << ',' << g6(p.accuracy.aligned) << '\n';
    out << axis << '=' << p.value << " drifted=" << fixed2(p.accuracy.drifted)
        << " aligned=" << fixed2(p.accuracy.aligned) << '\n';
  }
  f.flush();
  if (!f) throw IoError("failed writing " + csv.string());
  out << "summary=" << csv.string() << '\n';
  return code;
}

int cmd_gradcheck(std::uint64_t seed, const CliHooks& hooks, std::ostream& out) {
  GradcheckConfig cfg;
  cfg.seed = seed;
  const GradcheckResult r = run_gradcheck(cfg, hooks.gradcheck_backward);
  const bool ok = r.max_error() < cfg.tolerance;
  out << "networks=" << cfg.networks << " probes=" << r.probes << " entries=" << r.entries
      << " redrawn_near_kink=" << r.redrawn << '\n';
  out << "max_rel_error_input=" << g6(r.max_input_error) << " max_rel_error_params=" << g6(r.max_param_error)
      << '\n';
  out << "max_rel_error=" << g6(r.max_error()) << " tolerance=" << g6(cfg.tolerance) << ' '
      << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kOk : kStageFailure;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw FormatError("report file missing: " + p.string());
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

int cmd_inspect(const fs::path& dir, std::ostream& out) {
  const auto r = dataio::read_report(dir);
  out << "report " << dir.string() << '\n';
  out << "seed " << r.seed << '\n';
  out << "eval_examples " << r.eval_examples << '\n';
  out << "accuracy pre_drift=" << fixed2(r.accuracy.pre_drift) << " drifted=" << fixed2(r.accuracy.drifted)
      << " aligned=" << fixed2(r.accuracy.aligned) << '\n';
  out << "energy mean_in=" << g6(r.energy.mean_in) << " mean_out=" << g6(r.energy.mean_out)
      << " before_align=" << g6(r.energy.mean_before_align)
      << " after_align=" << g6(r.energy.mean_after_align) << '\n';
  for (const char* f : dataio::kReportFiles) {
    if (std::string(f) == "report.json") continue;
    out << "file " << f << " rows=" << count_lines(dir / f) - 1 << '\n';
  }
  for (const auto& [stage, secs] : r.stage_seconds) out << "stage " << stage << ' ' << fixed2(secs) << " s\n";
  out << "config\n";
  for (const auto& [k, v] : r.config.entries()) out << "  " << k << " = " << v << '\n';
  return kOk;
}

}  // namespace

std::string sweep_axis_key(const std::string& axis) {
  if (axis == "langevin_steps") return "align.l_steps";
  if (axis == "ebm_iterations") return "ebm.iterations";
  if (axis == "ebm_hidden_dims") return "ebm.hidden_dims";
  if (axis == "align_lr") return "align.lr";
  throw ConfigError("unknown sweep axis '" + axis +
                    "' (expected langevin_steps, ebm_iterations, ebm_hidden_dims or align_lr)");
}

std::uint64_t sweep_point_seed(std::uint64_t seed, std::size_t index) {
  // Small enough to read and retype.
  return numeric::Rng(seed).split(0x5eed0000 + index).next_u64() % 1000000007ULL;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const CliHooks& hooks) {
  CLI::App app{"Energy-based latent alignment for continual learning"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  bool save_ckpt = false;
  auto* run = app.add_subcommand("run", "Train, drift, learn the energy model, align and report");
  add_common(*run, run_opts);
  run->add_flag("--save-checkpoints", save_ckpt, "Also write model checkpoints (config key: output.checkpoints)");

  CommonOptions sweep_opts;
  std::string axis;
  std::optional<std::string> values;
  std::optional<std::size_t> parallel;
  auto* sweep = app.add_subcommand("sweep", "Repeat the run over values of one setting");
  add_common(*sweep, sweep_opts);
  sweep->add_option("--axis", axis, "langevin_steps | ebm_iterations | ebm_hidden_dims | align_lr");
  sweep->add_option("--values", values, "Comma-separated values; hidden dims as 64x64");
  sweep->add_option("--parallel", parallel, "Points run concurrently (config key: sweep.parallel)");

  std::uint64_t gc_seed = 0;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare backprop with finite differences");
  gradcheck->add_option("--seed", gc_seed, "Seed for networks and probes");

  std::string report_dir;
  auto* inspect = app.add_subcommand("inspect-report", "Summarize a report directory");
  inspect->add_option("dir", report_dir, "Report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(run_opts, save_ckpt, out, err);
    if (*sweep) return cmd_sweep(sweep_opts, axis, values, parallel, out, err);
    if (*gradcheck) return cmd_gradcheck(gc_seed, hooks, out);
    if (*inspect) return cmd_inspect(report_dir, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const StageError& e) {
    err << "stage failure " << e.what() << '\n';
    return kStageFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kStageFailure;
  }
  return kConfigError;
}

}  // namespace eli::cli
