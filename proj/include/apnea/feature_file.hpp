#ifndef APNEA_FEATURE_FILE_HPP
#define APNEA_FEATURE_FILE_HPP

// Self-describing little-endian container for extracted feature
// segments, plus a CSV export for interop.
//
//   "APNF" | u32 version | u32 n_channels | u32 n_points | u64 n_segments
//   per segment: str record_id | i32 minute | u8 label | u32 beat_count
//                | f32 mu[4] | f32 sigma[4] | f32 data[n_channels*n_points]
//   u32 crc32 over everything after the magic
//
// Byte-stable across runs for identical input.

#include <filesystem>
#include <span>
#include <vector>

#include "apnea/features.hpp"

namespace apnea {

inline constexpr uint32_t kFeatureFileVersion = 1;

std::vector<uint8_t> serialize_feature_segments(std::span<const FeatureSegment> segments);
std::vector<FeatureSegment> deserialize_feature_segments(const std::vector<uint8_t>& bytes);

void write_feature_file(const std::filesystem::path& path,
                        std::span<const FeatureSegment> segments);
std::vector<FeatureSegment> read_feature_file(const std::filesystem::path& path);

// Header row: segment_id,label,channel,idx,value
// segment_id is "<record_id>:<minute_index>", channel a name from
// kChannelNames, value the normalized channel sample.
std::string feature_csv(std::span<const FeatureSegment> segments);
void write_feature_csv(const std::filesystem::path& path,
                       std::span<const FeatureSegment> segments);

}  // namespace apnea

#endif
