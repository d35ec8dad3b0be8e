#ifndef APNEA_BINIO_HPP
#define APNEA_BINIO_HPP

// Little-endian byte buffers, CRC32 and atomic file writes shared by the
// feature container, checkpoint files and annotation streams.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace apnea {

uint32_t crc32(const uint8_t* data, size_t len, uint32_t seed = 0);

std::vector<uint8_t> read_file(const std::filesystem::path& path);

// Writes to `<path>.tmp` then renames, so partially written artifacts are
// never visible under the final name.
void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<uint8_t>& bytes);

class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u16(uint16_t v) {
        buf_.push_back(static_cast<uint8_t>(v & 0xFF));
        buf_.push_back(static_cast<uint8_t>(v >> 8));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        u32(bits);
    }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        u64(bits);
    }
    void bytes(const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void str(const std::string& s) {
        if (s.size() > 0xFFFF) throw std::invalid_argument("string too long for container");
        u16(static_cast<uint16_t>(s.size()));
        bytes(s.data(), s.size());
    }

    const std::vector<uint8_t>& data() const { return buf_; }
    std::vector<uint8_t> take() { return std::move(buf_); }
    size_t size() const { return buf_.size(); }

private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(const uint8_t* data, size_t len) : p_(data), end_(data + len) {}
    explicit ByteReader(const std::vector<uint8_t>& v) : ByteReader(v.data(), v.size()) {}

    uint8_t u8() { return *need(1); }
    uint16_t u16() {
        const uint8_t* b = need(2);
        return static_cast<uint16_t>(b[0] | (b[1] << 8));
    }
    uint32_t u32() {
        const uint8_t* b = need(4);
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    }
    uint64_t u64() {
        uint64_t lo = u32();
        uint64_t hi = u32();
        return lo | (hi << 32);
    }
    int32_t i32() { return static_cast<int32_t>(u32()); }
    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::string str() {
        size_t n = u16();
        const uint8_t* b = need(n);
        return std::string(reinterpret_cast<const char*>(b), n);
    }
    void skip(size_t n) { need(n); }

    size_t remaining() const { return static_cast<size_t>(end_ - p_); }
    bool at_end() const { return p_ == end_; }

private:
    const uint8_t* need(size_t n) {
        if (remaining() < n) throw std::runtime_error("truncated payload");
        const uint8_t* b = p_;
        p_ += n;
        return b;
    }
    const uint8_t* p_;
    const uint8_t* end_;
};

}  // namespace apnea

#endif
