#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace eli::dataio {

// IDX container restricted to unsigned-byte payloads (type code 0x08).
struct IdxFile {
  std::array<std::uint8_t, 4> magic{0, 0, 0x08, 0};
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;

  std::size_t element_count() const;
};

// Parses the big-endian header and reads exactly the declared payload.
// Throws IoError when the file cannot be opened, FormatError on a bad magic,
// an empty or truncated file (with expected/actual byte counts).
IdxFile read_idx(const std::filesystem::path& path);

void write_idx(const std::filesystem::path& path, const IdxFile& file);

}  // namespace eli::dataio
