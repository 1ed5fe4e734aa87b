#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace hic {

// File layout: "HICM" | u16 version | u64 manifest length | manifest JSON | payload.
// All integers and floats little-endian.
inline constexpr std::string_view kMagic = "HICM";
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 4 + 2 + 8;

struct Container {
    nlohmann::json manifest;  // always carries "kind" and "payload_bytes"
    std::string payload;
};

std::string encode_container(const Container& c);
// Checks magic, version, manifest and kind; payload length must equal manifest.payload_bytes.
Container decode_container(std::string_view bytes, std::string_view expected_kind);

// Writes to a sibling temporary file, then renames over path.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

class ByteWriter {
public:
    void f32(double v);
    void f64(double v);
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

// Reads little-endian values from a payload; offsets in errors count from file start.
class ByteReader {
public:
    ByteReader(std::string_view bytes, std::size_t base_offset) : bytes_(bytes), base_(base_offset) {}
    double f32();
    double f64();
    std::size_t remaining() const noexcept { return bytes_.size() - at_; }

private:
    const char* take(std::size_t n);

    std::string_view bytes_;
    std::size_t base_;
    std::size_t at_ = 0;
};

std::string hex64(std::uint64_t v);
std::uint64_t parse_hex64(const std::string& s);

}  // namespace hic
