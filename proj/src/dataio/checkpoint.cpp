#include "eli/dataio/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "eli/continuum/experiment.hpp"
#include "eli/dataio/config.hpp"
#include "eli/numeric/errors.hpp"

namespace eli::dataio {

namespace {

constexpr char kMagic[8] = {'E', 'L', 'I', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint64_t kMaxConfigBytes = 1 << 20;
constexpr std::uint64_t kMaxDim = 1 << 24;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot write checkpoint " + path.string());
  }

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void params(const numeric::MlpParams& p) {
    u32(static_cast<std::uint32_t>(p.layers.size()));
    for (const auto& l : p.layers) {
      u32(static_cast<std::uint32_t>(l.activation));
      u64(l.weight.rows());
      u64(l.weight.cols());
      for (double v : l.weight.data()) f64(v);
      for (double v : l.bias) f64(v);
    }
  }

  void close() {
    out_.flush();
    if (!out_) throw IoError("failed writing checkpoint " + path_.string());
  }

 private:
  void le(std::uint64_t v, int n) {
    char b[8];
    for (int i = 0; i < n; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(b, n);
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open checkpoint " + path.string());
  }

  void bytes(void* p, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail(std::string("truncated ") + what);
  }
  std::uint64_t le(int n, const char* what) {
    unsigned char b[8];
    bytes(b, static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = n - 1; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(le(4, what)); }
  std::uint64_t u64(const char* what) { return le(8, what); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  numeric::MlpParams params() {
    numeric::MlpParams p;
    const std::uint32_t n = u32("layer count");
    if (n == 0 || n > 1024) fail("implausible layer count " + std::to_string(n));
    for (std::uint32_t k = 0; k < n; ++k) {
      numeric::DenseLayer l;
      const std::uint32_t act = u32("activation");
      if (act > static_cast<std::uint32_t>(numeric::Activation::softplus)) {
        fail("unknown activation code " + std::to_string(act));
      }
      l.activation = static_cast<numeric::Activation>(act);
      const std::uint64_t rows = u64("weight rows");
      const std::uint64_t cols = u64("weight cols");
      if (rows == 0 || cols == 0 || rows > kMaxDim || cols > kMaxDim || rows * cols > kMaxDim * 16) {
        fail("implausible layer shape " + std::to_string(rows) + "x" + std::to_string(cols));
      }
      l.weight = numeric::Matrix(rows, cols);
      for (double& v : l.weight.data()) v = f64("weights");
      l.bias.resize(rows);
      for (double& v : l.bias) v = f64("bias");
      p.layers.push_back(std::move(l));
    }
    try {
      numeric::validate(p);
    } catch (const ShapeError& e) {
      fail(e.what());
    }
    return p;
  }

  CheckpointInfo header() {
    char magic[8];
    bytes(magic, 8, "magic");
    if (std::memcmp(magic, kMagic, 8) != 0) fail("bad magic");
    CheckpointInfo info;
    info.version = u32("version");
    if (info.version != kCheckpointVersion) {
      fail("unsupported version " + std::to_string(info.version) + " (expected " +
           std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint32_t kind = u32("kind");
    if (kind != 1 && kind != 2) fail("unknown kind " + std::to_string(kind));
    info.kind = static_cast<CheckpointKind>(kind);
    const std::uint64_t len = u64("config length");
    if (len > kMaxConfigBytes) fail("implausible config length " + std::to_string(len));
    info.config_text.resize(len);
    bytes(info.config_text.data(), len, "config");
    info.config_hash = u64("config hash");
    if (info.config_hash != fnv1a64(info.config_text)) fail("config hash mismatch");
    return info;
  }

  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) fail("trailing bytes");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("checkpoint " + path_.string() + ": " + what);
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

void write_header(Writer& w, CheckpointKind kind, const std::string& config_text) {
  w.bytes(kMagic, 8);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(kind));
  w.u64(config_text.size());
  w.bytes(config_text.data(), config_text.size());
  w.u64(fnv1a64(config_text));
}

CheckpointInfo expect_kind(Reader& r, CheckpointKind kind) {
  CheckpointInfo info = r.header();
  if (info.kind != kind) {
    r.fail(std::string("holds a ") +
           (info.kind == CheckpointKind::classifier ? "classifier" : "energy model"));
  }
  return info;
}

}  // namespace

void save_checkpoint(const ebm::EnergyModel& model, const std::filesystem::path& path) {
  ebm::validate(model);
  Writer w(path);
  write_header(w, CheckpointKind::energy_model, continuum::to_key_values(model.config).to_text());
  w.params(model.net);
  w.f64(model.ema.decay);
  w.params(model.ema.shadow);
  w.close();
}

void save_checkpoint(const continuum::ClassifierModel& model, const std::string& config_text,
                     const std::filesystem::path& path) {
  continuum::validate(model);
  Writer w(path);
  write_header(w, CheckpointKind::classifier, config_text);
  w.params(model.backbone);
  w.params(model.head);
  w.close();
}

ebm::EnergyModel load_energy_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
  Reader r(path);
  CheckpointInfo header = expect_kind(r, CheckpointKind::energy_model);
  ebm::EnergyModel m;
  try {
    m.config = continuum::ebm_config_from_key_values(KeyValues::parse(header.config_text, path.string()));
  } catch (const ConfigError& e) {
    r.fail(std::string("config echo: ") + e.what());
  }
  m.net = r.params();
  m.ema.decay = r.f64("ema decay");
  m.ema.shadow = r.params();
  r.expect_end();
  try {
    ebm::validate(m);
  } catch (const Error& e) {
    r.fail(e.what());
  }
  if (info) *info = std::move(header);
  return m;
}

continuum::ClassifierModel load_classifier_checkpoint(const std::filesystem::path& path,
                                                      CheckpointInfo* info) {
  Reader r(path);
  CheckpointInfo header = expect_kind(r, CheckpointKind::classifier);
  continuum::ClassifierModel m;
  m.backbone = r.params();
  m.head = r.params();
  r.expect_end();
  try {
    continuum::validate(m);
  } catch (const ShapeError& e) {
    r.fail(e.what());
  }
  if (info) *info = std::move(header);
  return m;
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  Reader r(path);
  return r.header();
}

}  // namespace eli::dataio
