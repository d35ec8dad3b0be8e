#include "apnea/feature_file.hpp"

#include <cinttypes>
#include <cstdio>
#include <stdexcept>

#include "apnea/binio.hpp"

namespace apnea {

namespace {
constexpr char kMagic[4] = {'A', 'P', 'N', 'F'};
}

std::vector<uint8_t> serialize_feature_segments(std::span<const FeatureSegment> segments) {
    int n_channels = segments.empty() ? 4 : segments.front().n_channels;
    for (const auto& s : segments) {
        if (s.n_channels != n_channels)
            throw std::invalid_argument("segments mix channel layouts");
        if (s.channels.size() != static_cast<size_t>(n_channels) * kFeaturePoints)
            throw std::invalid_argument("segment channel data has wrong size");
    }

    ByteWriter w;
    w.bytes(kMagic, 4);
    w.u32(kFeatureFileVersion);
    w.u32(static_cast<uint32_t>(n_channels));
    w.u32(kFeaturePoints);
    w.u64(segments.size());
    for (const auto& s : segments) {
        w.str(s.record_id);
        w.i32(s.minute_index);
        w.u8(s.label);
        w.u32(s.beat_count);
        for (float m : s.mu) w.f32(m);
        for (float m : s.sigma) w.f32(m);
        for (float v : s.channels) w.f32(v);
    }
    const auto& body = w.data();
    uint32_t crc = crc32(body.data() + 4, body.size() - 4);
    w.u32(crc);
    return w.take();
}

std::vector<FeatureSegment> deserialize_feature_segments(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 4 + 4 + 4 + 4 + 8 + 4) throw std::runtime_error("feature file too short");
    if (!std::equal(kMagic, kMagic + 4, bytes.begin()))
        throw std::runtime_error("not a feature file (bad magic)");

    uint32_t stored_crc = ByteReader(bytes.data() + bytes.size() - 4, 4).u32();
    uint32_t actual_crc = crc32(bytes.data() + 4, bytes.size() - 8);
    if (stored_crc != actual_crc) throw std::runtime_error("feature file checksum failure");

    ByteReader r(bytes.data() + 4, bytes.size() - 8);
    uint32_t version = r.u32();
    if (version != kFeatureFileVersion)
        throw std::runtime_error("feature file version mismatch: " + std::to_string(version));
    uint32_t n_channels = r.u32();
    if (n_channels != 2 && n_channels != 4)
        throw std::runtime_error("feature file declares unsupported channel count");
    uint32_t n_points = r.u32();
    if (n_points != kFeaturePoints)
        throw std::runtime_error("feature file declares unsupported point count");
    uint64_t n_segments = r.u64();

    std::vector<FeatureSegment> out;
    out.reserve(n_segments);
    for (uint64_t i = 0; i < n_segments; ++i) {
        FeatureSegment s;
        s.record_id = r.str();
        s.minute_index = r.i32();
        s.label = r.u8();
        s.beat_count = r.u32();
        for (float& m : s.mu) m = r.f32();
        for (float& m : s.sigma) m = r.f32();
        s.n_channels = static_cast<int>(n_channels);
        s.channels.resize(static_cast<size_t>(n_channels) * kFeaturePoints);
        for (float& v : s.channels) v = r.f32();
        out.push_back(std::move(s));
    }
    if (!r.at_end()) throw std::runtime_error("feature file has trailing bytes");
    return out;
}

void write_feature_file(const std::filesystem::path& path,
                        std::span<const FeatureSegment> segments) {
    write_file_atomic(path, serialize_feature_segments(segments));
}

std::vector<FeatureSegment> read_feature_file(const std::filesystem::path& path) {
    return deserialize_feature_segments(read_file(path));
}

std::string feature_csv(std::span<const FeatureSegment> segments) {
    std::string out = "segment_id,label,channel,idx,value\n";
    char line[128];
    for (const auto& s : segments)
        for (int ch = 0; ch < s.n_channels; ++ch)
            for (int i = 0; i < kFeaturePoints; ++i) {
                std::snprintf(line, sizeof line, "%s:%d,%d,%s,%d,%.9g\n", s.record_id.c_str(),
                              s.minute_index, static_cast<int>(s.label), kChannelNames[ch], i,
                              static_cast<double>(s.at(ch, i)));
                out += line;
            }
    return out;
}

void write_feature_csv(const std::filesystem::path& path,
                       std::span<const FeatureSegment> segments) {
    std::string csv = feature_csv(segments);
    write_file_atomic(path, std::vector<uint8_t>(csv.begin(), csv.end()));
}

}  // namespace apnea
