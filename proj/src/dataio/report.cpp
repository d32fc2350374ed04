#include "eli/dataio/report.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "eli/numeric/errors.hpp"
#include "json.hpp"

namespace eli::dataio {

namespace {

using nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

void write_snapshot(const LatentSnapshot& s, const std::filesystem::path& path) {
  if (s.xy.rows() != s.label.size() || s.xy.rows() != s.task.size() ||
      (s.xy.rows() > 0 && s.xy.cols() != 2)) {
    throw ShapeError("snapshot for " + path.string() + " is inconsistent");
  }
  auto out = open_out(path);
  out << "x,y,class,task\n";
  for (std::size_t r = 0; r < s.xy.rows(); ++r) {
    out << g6(s.xy(r, 0)) << ',' << g6(s.xy(r, 1)) << ',' << s.label[r] << ',' << s.task[r] << '\n';
  }
  finish(out, path);
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ordered_json load_json(const std::filesystem::path& dir) {
  const auto path = dir / "report.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_report(const AlignmentReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  ordered_json j;
  j["format"] = "eli-report";
  j["version"] = kFormatVersion;
  j["seed"] = report.seed;
  j["accuracy"] = {{"pre_drift", report.accuracy.pre_drift},
                   {"drifted", report.accuracy.drifted},
                   {"aligned", report.accuracy.aligned}};
  j["eval_examples"] = report.eval_examples;
  j["energy"] = {{"mean_in", report.energy.mean_in},
                 {"mean_out", report.energy.mean_out},
                 {"mean_before_align", report.energy.mean_before_align},
                 {"mean_after_align", report.energy.mean_after_align}};
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : report.config.entries()) cfg[k] = v;
  j["config"] = cfg;
  j["files"] = {{"latents_before", "latents_before.csv"},
                {"latents_after", "latents_after.csv"},
                {"energy_trace", "energy_trace.csv"},
                {"dim_delta", "dim_delta.csv"}};
  ordered_json wall = ordered_json::object();
  for (const auto& [stage, secs] : report.stage_seconds) wall[stage] = secs;
  j["metadata"] = {{"created_utc", utc_now()}, {"wall_clock_seconds", wall}};

  {
    const auto path = out_dir / "report.json";
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    finish(out, path);
  }
  write_snapshot(report.before, out_dir / "latents_before.csv");
  write_snapshot(report.after, out_dir / "latents_after.csv");
  {
    const auto path = out_dir / "energy_trace.csv";
    auto out = open_out(path);
    out << "row,step,energy\n";
    for (std::size_t r = 0; r < report.energy_trace.rows(); ++r) {
      for (std::size_t s = 0; s < report.energy_trace.cols(); ++s) {
        out << r << ',' << s << ',' << g6(report.energy_trace(r, s)) << '\n';
      }
    }
    finish(out, path);
  }
  {
    const auto path = out_dir / "dim_delta.csv";
    auto out = open_out(path);
    out << "dim,step,delta\n";
    for (std::size_t d = 0; d < report.dim_delta.rows(); ++d) {
      for (std::size_t s = 0; s < report.dim_delta.cols(); ++s) {
        out << d << ',' << s + 1 << ',' << g6(report.dim_delta(d, s)) << '\n';
      }
    }
    finish(out, path);
  }
}

AlignmentReport read_report(const std::filesystem::path& dir) {
  const ordered_json j = load_json(dir);
  const auto where = (dir / "report.json").string();
  try {
    if (j.at("format").get<std::string>() != "eli-report") {
      throw FormatError(where + ": not an alignment report");
    }
    if (j.at("version").get<int>() != kFormatVersion) {
      throw FormatError(where + ": unsupported report version " + j.at("version").dump());
    }
    AlignmentReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    const auto& acc = j.at("accuracy");
    r.accuracy = {acc.at("pre_drift").get<double>(), acc.at("drifted").get<double>(),
                  acc.at("aligned").get<double>()};
    const auto& en = j.at("energy");
    r.energy = {en.at("mean_in").get<double>(), en.at("mean_out").get<double>(),
                en.at("mean_before_align").get<double>(), en.at("mean_after_align").get<double>()};
    r.eval_examples = j.at("eval_examples").get<std::size_t>();
    for (const auto& [k, v] : j.at("config").items()) r.config.set(k, v.get<std::string>());
    if (j.contains("metadata") && j["metadata"].contains("wall_clock_seconds")) {
      for (const auto& [k, v] : j["metadata"]["wall_clock_seconds"].items()) {
        r.stage_seconds.emplace_back(k, v.get<double>());
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": " + e.what());
  }
}

std::string report_json_without_metadata(const std::filesystem::path& dir) {
  ordered_json j = load_json(dir);
  j.erase("metadata");
  return j.dump();
}

}  // namespace eli::dataio
