#include "eli/dataio/idx.hpp"

#include <fstream>

#include "eli/numeric/errors.hpp"

namespace eli::dataio {

namespace {

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

// Reads up to n bytes; returns how many arrived.
std::size_t read_some(std::ifstream& in, std::uint8_t* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount());
}

}  // namespace

std::size_t IdxFile::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

IdxFile read_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open IDX file " + path.string());

  IdxFile file;
  const std::size_t got_magic = read_some(in, file.magic.data(), 4);
  if (got_magic == 0) throw FormatError(path.string() + ": empty file");
  if (got_magic < 4) throw FormatError(path.string() + ": truncated magic number");
  if (file.magic[0] != 0 || file.magic[1] != 0 || file.magic[2] != 0x08 || file.magic[3] == 0) {
    throw FormatError(path.string() + ": bad magic (expected 00 00 08 <rank>)");
  }

  const std::size_t rank = file.magic[3];
  std::vector<std::uint8_t> header(4 * rank);
  const std::size_t got_header = read_some(in, header.data(), header.size());
  if (got_header < header.size()) {
    throw FormatError(path.string() + ": truncated header, expected " +
                      std::to_string(header.size()) + " bytes of dims, got " +
                      std::to_string(got_header));
  }
  file.dims.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) file.dims[i] = read_be32(header.data() + 4 * i);

  const std::size_t expected = file.element_count();
  file.payload.resize(expected);
  const std::size_t got = read_some(in, file.payload.data(), expected);
  if (got < expected) {
    throw FormatError(path.string() + ": truncated payload, expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(got));
  }
  return file;
}

void write_idx(const std::filesystem::path& path, const IdxFile& file) {
  if (file.dims.size() != file.magic[3]) {
    throw FormatError("write_idx: rank byte does not match dims");
  }
  if (file.payload.size() != file.element_count()) {
    throw FormatError("write_idx: payload length does not match dims");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write IDX file " + path.string());
  out.write(reinterpret_cast<const char*>(file.magic.data()), 4);
  for (auto d : file.dims) put_be32(out, d);
  out.write(reinterpret_cast<const char*>(file.payload.data()),
            static_cast<std::streamsize>(file.payload.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace eli::dataio
