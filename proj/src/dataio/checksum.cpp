#include "eli/dataio/checksum.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <sstream>

#include "eli/numeric/errors.hpp"

namespace eli::dataio {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest initialisation failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    const auto n = static_cast<std::size_t>(in.gcount());
    if (n > 0) EVP_DigestUpdate(ctx.get(), buf.data(), n);
  }
  if (in.bad()) throw IoError("read error on " + path.string());

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xF];
  }
  return hex;
}

std::size_t verify_checksums(const std::filesystem::path& dir) {
  const auto manifest = dir / "SHA256SUMS";
  if (!std::filesystem::exists(manifest)) return 0;
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open " + manifest.string());

  std::size_t checked = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string expected, name;
    if (!(fields >> expected >> name)) continue;
    if (!name.empty() && name.front() == '*') name.erase(0, 1);  // binary-mode marker
    const auto actual = sha256_file(dir / name);
    if (actual != expected) {
      throw DataError("checksum mismatch for " + (dir / name).string() + ": expected " + expected +
                      ", got " + actual);
    }
    ++checked;
  }
  return checked;
}

}  // namespace eli::dataio
