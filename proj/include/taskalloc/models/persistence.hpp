#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "taskalloc/models/model.hpp"

namespace taskalloc::models {

/// Container layout (all integers little-endian):
///   magic "TALMODEL" | u32 version | u64 metadata length | metadata JSON |
///   u32 tensor count | per tensor: u32 name length, name, u64 count, count x f64 |
///   u64 FNV-1a digest of every preceding byte.
inline constexpr std::uint32_t kContainerVersion = 1;

std::string serialize_model(const TrainedModel& model);
/// Throws Error(VersionMismatch) for other container versions and
/// Error(CorruptContainer) for truncated, altered or inconsistent data.
TrainedModel deserialize_model(std::string_view bytes);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace taskalloc::models
