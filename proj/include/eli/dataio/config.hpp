#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace eli::dataio {

/// Flat key/value text. Lines are `key = value`; `[section]` prefixes the
/// following keys with `section.`; `#` starts a comment. Keys are kept sorted
/// so serialized output is stable.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValues load(const std::filesystem::path& path);

  // Parses `key=value`, as given on a command line.
  void set_assignment(const std::string& assignment);
  void set(const std::string& key, std::string value);
  void merge(const KeyValues& other);  // other wins

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& at(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const { return values_; }

  // Serialized as sorted `key = value` lines.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

// Typed conversions; each throws ConfigError naming the key on bad input.
std::size_t to_size(const std::string& key, const std::string& value);
long long to_int(const std::string& key, const std::string& value);
double to_double(const std::string& key, const std::string& value);
bool to_bool(const std::string& key, const std::string& value);
std::vector<std::size_t> to_size_list(const std::string& key, const std::string& value);

// Shortest text that parses back to the same double.
std::string format_double(double v);
std::string format_size_list(const std::vector<std::size_t>& v);

// 64-bit FNV-1a over the bytes of text.
std::uint64_t fnv1a64(const std::string& text);

}  // namespace eli::dataio
