#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "eli/continuum/classifier.hpp"
#include "eli/ebm/energy.hpp"

namespace eli::dataio {

enum class CheckpointKind : std::uint32_t { energy_model = 1, classifier = 2 };

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  std::uint32_t version = 0;
  CheckpointKind kind = CheckpointKind::energy_model;
  std::string config_text;       // key = value lines
  std::uint64_t config_hash = 0; // FNV-1a of config_text
};

/// Binary layout (little-endian): 8-byte magic "ELICKPT\0", u32 version,
/// u32 kind, u64 config length, config bytes, u64 config hash, then one or
/// two networks. See docs/formats.md.
void save_checkpoint(const ebm::EnergyModel& model, const std::filesystem::path& path);
void save_checkpoint(const continuum::ClassifierModel& model, const std::string& config_text,
                     const std::filesystem::path& path);

// Throw IoError if unreadable and FormatError on a bad magic, an unknown
// version, the wrong kind, a hash mismatch or a truncated body.
ebm::EnergyModel load_energy_checkpoint(const std::filesystem::path& path,
                                        CheckpointInfo* info = nullptr);
continuum::ClassifierModel load_classifier_checkpoint(const std::filesystem::path& path,
                                                      CheckpointInfo* info = nullptr);
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

}  // namespace eli::dataio
