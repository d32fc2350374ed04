#pragma once

#include <filesystem>
#include <string>

namespace eli::dataio {

// Lower-case hex SHA-256 of a file's bytes. Throws IoError if unreadable.
std::string sha256_file(const std::filesystem::path& path);

// When dir holds a SHA256SUMS manifest (`<hex>  <file>` per line, as written
// by sha256sum), verifies every listed file and throws DataError naming the
// first mismatch. Returns the number of files checked; 0 without a manifest.
std::size_t verify_checksums(const std::filesystem::path& dir);

}  // namespace eli::dataio
