#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "eli/dataio/checkpoint.hpp"
#include "eli/dataio/report.hpp"
#include "eli/numeric/errors.hpp"
#include "support/temp_dir.hpp"

namespace {

namespace fs = std::filesystem;
using eli::testing_support::TempDir;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args, const eli::cli::CliHooks& hooks = {}) {
  args.insert(args.begin(), "eli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.code = eli::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err, hooks);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A synthetic run that takes well under a second.
fs::path write_tiny_config(const TempDir& dir, const std::string& extra = "") {
  const fs::path p = dir / "tiny.cfg";
  std::ofstream f(p);
  f << "seed = 3\n"
       "dataset = synthetic\n"
       "[synthetic]\n"
       "dim = 8\n"
       "drift = 1.5\n"
       "train_per_class = 40\n"
       "test_per_class = 20\n"
       "[model]\n"
       "latent_dim = 8\n"
       "backbone_hidden = 16\n"
       "[base]\n"
       "epochs = 2\n"
       "[ebm]\n"
       "iterations = 20\n"
       "batch_size = 16\n"
       "hidden_dims = 16,16\n"
       "[ebm.langevin]\n"
       "steps = 3\n"
       "[align]\n"
       "l_steps = 4\n"
       "[report]\n"
       "snapshot_rows = 10\n"
    << extra;
  return p;
}

TEST(CliRun, WritesReportAndPrintsAccuracies) {
  TempDir dir;
  const auto cfg = write_tiny_config(dir);
  const Outcome o = cli({"run", "--config", cfg.string(), "--seed", "7", "--out", (dir / "r").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("pre_drift="), std::string::npos);
  EXPECT_NE(o.out.find("aligned="), std::string::npos);
  for (const char* f : eli::dataio::kReportFiles) EXPECT_TRUE(fs::exists(dir / "r" / f)) << f;
  EXPECT_EQ(eli::dataio::read_report(dir / "r").seed, 7u);
  // progress goes to stderr only
  EXPECT_NE(o.err.find("learn_ebm"), std::string::npos);
  EXPECT_EQ(o.out.find("learn_ebm"), std::string::npos);
}

TEST(CliRun, SetOverrideIsEchoed) {
  TempDir dir;
  const auto cfg = write_tiny_config(dir);
  const Outcome o = cli({"run", "-c", cfg.string(), "--set", "align.l_steps=5", "-o", (dir / "r").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto r = eli::dataio::read_report(dir / "r");
  EXPECT_EQ(r.config.at("align.l_steps"), "5");
  EXPECT_FALSE(r.config.contains("output.dir"));
}

TEST(CliRun, FlagBeatsFileAndSetBeatsFlag) {
  TempDir dir;
  const auto cfg = write_tiny_config(dir);
  const Outcome o = cli({"run", "-c", cfg.string(), "--seed", "9", "--set", "seed=11", "-o", (dir / "r").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(eli::dataio::read_report(dir / "r").seed, 11u);
}

TEST(CliRun, OutputDirFromConfigFile) {
  TempDir dir;
  const auto cfg = write_tiny_config(dir, "[output]\ndir = " + (dir / "fromfile").string() + "\ncheckpoints = true\n");
  const Outcome o = cli({"run", "-c", cfg.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_TRUE(fs::exists(dir / "fromfile" / "report.json"));
  EXPECT_NO_THROW(eli::dataio::load_energy_checkpoint(dir / "fromfile" / "energy.ckpt"));
  EXPECT_NO_THROW(eli::dataio::load_classifier_checkpoint(dir / "fromfile" / "previous.ckpt"));
}

TEST(CliRun, IdenticalRunsGiveIdenticalData) {
  TempDir dir;
  const auto cfg = write_tiny_config(dir);
  ASSERT_EQ(cli({"run", "-c", cfg.string(), "-o", (dir / "a").string()}).code, 0);
  ASSERT_EQ(cli({"run", "-c", cfg.string(), "-o", (dir / "b").string()}).code, 0);
  for (const char* f : eli::dataio::kReportFiles) {
    if (std::string(f) == "report.json") continue;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  EXPECT_EQ(eli::dataio::report_json_without_metadata(dir / "a"),
            eli::dataio::report_json_without_metadata(dir / "b"));
}

TEST(CliRun, ConfigErrorsExitTwo) {
  TempDir dir;
  EXPECT_EQ(cli({"run", "-c", (dir / "missing.cfg").string()}).code, 2);
  const auto cfg = write_tiny_config(dir);
  EXPECT_EQ(cli({"run", "-c", cfg.string(), "--set", "ebm.nonsense=1"}).code, 2);
  EXPECT_EQ(cli({"run", "-c", cfg.string(), "--set", "noequals"}).code, 2);
  EXPECT_EQ(cli({"run", "-c", cfg.string(), "--set", "align.lr=-1"}).code, 2);
  EXPECT_EQ(cli({"run", "-c", cfg.string(), "--set", "output.colour=red"}).code, 2);
  EXPECT_EQ(cli({"run"}).code, 2);
  EXPECT_EQ(cli({"launch"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
}

TEST(CliRun, StageFailureExitsOneWithStageName) {
  TempDir dir;
  const auto cfg = write_tiny_config(dir);
  const Outcome o = cli({"run", "-c", cfg.string(), "--set", "dataset=mnist", "--set",
                         "synthetic.dim=32", "--data-root", (dir / "no-data").string()});
  EXPECT_EQ(o.code, 1) << o.err;
  EXPECT_NE(o.err.find("load_data"), std::string::npos) << o.err;
}

TEST(CliRun, DataRootFallsBackToEnvironment) {
  TempDir dir;
  const auto cfg = write_tiny_config(dir);
  ::setenv("ELI_DATA_ROOT", (dir / "env-root").c_str(), 1);
  const Outcome o = cli({"run", "-c", cfg.string(), "--set", "dataset=mnist", "--set", "synthetic.dim=32"});
  ::unsetenv("ELI_DATA_ROOT");
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("env-root"), std::string::npos) << o.err;
}

TEST(CliSweep, WritesSummaryAndOneReportPerValue) {
  TempDir dir;
  const auto cfg = write_tiny_config(dir);
  const Outcome o = cli({"sweep", "-c", cfg.string(), "--axis", "langevin_steps", "--values", "0,2,5",
                         "-o", (dir / "s").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string csv = slurp(dir / "s" / "sweep.csv");
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header, "value,drifted,aligned");
  std::vector<std::string> firsts;
  while (std::getline(in, row)) firsts.push_back(row.substr(0, row.find(',')));
  EXPECT_EQ(firsts, (std::vector<std::string>{"0", "2", "5"}));
  const auto r = eli::dataio::read_report(dir / "s" / "langevin_steps_1_2");
  EXPECT_EQ(r.config.at("align.l_steps"), "2");
  EXPECT_EQ(std::to_string(r.seed), r.config.at("seed"));
  // Zero alignment steps cannot change accuracy.
  const auto r0 = eli::dataio::read_report(dir / "s" / "langevin_steps_0_0");
  EXPECT_EQ(r0.accuracy.aligned, r0.accuracy.drifted);
}

TEST(CliSweep, HiddenDimsAxisAndParallelMatchesSequential) {
  TempDir dir;
  const auto cfg = write_tiny_config(dir);
  ASSERT_EQ(cli({"sweep", "-c", cfg.string(), "--axis", "ebm_hidden_dims", "--values", "8x8,16,4x4x4", "-o",
                 (dir / "seq").string()})
                .code,
            0);
  ASSERT_EQ(cli({"sweep", "-c", cfg.string(), "--axis", "ebm_hidden_dims", "--values", "8x8,16,4x4x4",
                 "--parallel", "3", "-o", (dir / "par").string()})
                .code,
            0);
  EXPECT_EQ(slurp(dir / "seq" / "sweep.csv"), slurp(dir / "par" / "sweep.csv"));
  EXPECT_EQ(eli::dataio::read_report(dir / "par" / "ebm_hidden_dims_2_4x4x4").config.at("ebm.hidden_dims"),
            "4,4,4");
  for (const char* f : {"dim_delta.csv", "latents_after.csv"}) {
    EXPECT_EQ(slurp(dir / "seq" / "ebm_hidden_dims_0_8x8" / f), slurp(dir / "par" / "ebm_hidden_dims_0_8x8" / f));
  }
}

TEST(CliSweep, PointSeedsAreDerivedAndDistinct) {
  EXPECT_EQ(eli::cli::sweep_point_seed(4, 2), eli::cli::sweep_point_seed(4, 2));
  EXPECT_NE(eli::cli::sweep_point_seed(4, 0), eli::cli::sweep_point_seed(4, 1));
  EXPECT_NE(eli::cli::sweep_point_seed(4, 0), eli::cli::sweep_point_seed(5, 0));
}

TEST(CliSweep, AxisKeys) {
  EXPECT_EQ(eli::cli::sweep_axis_key("ebm_iterations"), "ebm.iterations");
  EXPECT_EQ(eli::cli::sweep_axis_key("align_lr"), "align.lr");
  EXPECT_THROW(eli::cli::sweep_axis_key("batch_size"), eli::ConfigError);
}

TEST(CliSweep, BadRequestsExitTwo) {
  TempDir dir;
  const auto cfg = write_tiny_config(dir);
  EXPECT_EQ(cli({"sweep", "-c", cfg.string(), "--axis", "warp_speed", "--values", "1,2"}).code, 2);
  EXPECT_EQ(cli({"sweep", "-c", cfg.string(), "--axis", "align_lr", "--values", ""}).code, 2);
  EXPECT_EQ(cli({"sweep", "-c", cfg.string(), "--axis", "align_lr"}).code, 2);
  EXPECT_EQ(cli({"sweep", "-c", cfg.string(), "--values", "1"}).code, 2);
  EXPECT_EQ(cli({"sweep", "-c", cfg.string(), "--axis", "align_lr", "--values", "0.1,,0.2"}).code, 2);
  EXPECT_EQ(cli({"sweep", "-c", cfg.string(), "--axis", "align_lr", "--values", "0.1,abc"}).code, 2);
  EXPECT_EQ(cli({"sweep", "-c", cfg.string(), "--axis", "align_lr", "--values", "0.1", "--parallel", "0"}).code, 2);
  EXPECT_FALSE(fs::exists("eli_sweep"));
}

TEST(CliGradcheck, DefaultSeedPassesAndReportsContract) {
  const Outcome o = cli({"gradcheck"});
  EXPECT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("probes=100"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("tolerance=1e-05"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("max_rel_error="), std::string::npos) << o.out;
}

TEST(CliGradcheck, CorruptedBackwardFails) {
  eli::cli::CliHooks hooks;
  hooks.gradcheck_backward = [](const auto& p, const auto& cache, const auto& up) {
    auto g = eli::numeric::mlp_backward(p, cache, up);
    g.params.layers.back().bias[0] *= 1.001;
    return g;
  };
  const Outcome o = cli({"gradcheck", "--seed", "3"}, hooks);
  EXPECT_EQ(o.code, 1) << o.out;
  EXPECT_NE(o.out.find("FAIL"), std::string::npos);
}

TEST(CliGradcheck, InputGradientTamperingFails) {
  eli::cli::CliHooks hooks;
  hooks.gradcheck_backward = [](const auto& p, const auto& cache, const auto& up) {
    auto g = eli::numeric::mlp_backward(p, cache, up);
    for (double& v : g.input.data()) v = -v;
    return g;
  };
  EXPECT_EQ(cli({"gradcheck"}, hooks).code, 1);
}

TEST(CliInspect, SummarizesReport) {
  TempDir dir;
  const auto cfg = write_tiny_config(dir);
  ASSERT_EQ(cli({"run", "-c", cfg.string(), "-o", (dir / "r").string()}).code, 0);
  const Outcome o = cli({"inspect-report", (dir / "r").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("accuracy pre_drift="), std::string::npos);
  EXPECT_NE(o.out.find("file latents_before.csv rows=20"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("file dim_delta.csv rows=32"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("align.l_steps = 4"), std::string::npos);
}

TEST(CliInspect, MissingReportFails) {
  TempDir dir;
  EXPECT_EQ(cli({"inspect-report", (dir / "nothing").string()}).code, 1);
  EXPECT_EQ(cli({"inspect-report"}).code, 2);
}

}  // namespace
