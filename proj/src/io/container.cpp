#include "hic/io/container.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "hic/numeric/errors.hpp"

namespace hic {
namespace {

template <typename U>
void put_le(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const char* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

}  // namespace

std::string encode_container(const Container& c) {
    const std::string manifest = c.manifest.dump();
    std::string out;
    out.reserve(kHeaderBytes + manifest.size() + c.payload.size());
    out.append(kMagic);
    put_le<std::uint16_t>(out, kFormatVersion);
    put_le<std::uint64_t>(out, manifest.size());
    out.append(manifest);
    out.append(c.payload);
    return out;
}

Container decode_container(std::string_view bytes, std::string_view expected_kind) {
    if (bytes.size() < kHeaderBytes)
        throw FormatError("file is " + std::to_string(bytes.size()) + " bytes, shorter than the " +
                              std::to_string(kHeaderBytes) + "-byte header",
                          bytes.size());
    if (bytes.substr(0, 4) != kMagic) throw FormatError("bad magic: expected \"HICM\"", 0);
    const auto version = get_le<std::uint16_t>(bytes.data() + 4);
    if (version != kFormatVersion)
        throw FormatError("unsupported version " + std::to_string(version) + ": expected " +
                              std::to_string(kFormatVersion),
                          4);
    const auto length = get_le<std::uint64_t>(bytes.data() + 6);
    if (length > bytes.size() - kHeaderBytes)
        throw FormatError("manifest length " + std::to_string(length) + " exceeds file size", 6);
    Container c;
    try {
        c.manifest = nlohmann::json::parse(bytes.substr(kHeaderBytes, length));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("manifest is not valid JSON: ") + e.what(), kHeaderBytes + e.byte);
    }
    if (!c.manifest.is_object() || !c.manifest.contains("kind") || !c.manifest["kind"].is_string())
        throw FormatError("manifest has no kind", kHeaderBytes);
    const std::string kind = c.manifest["kind"].get<std::string>();
    if (kind != expected_kind)
        throw FormatError("file kind is '" + kind + "', expected '" + std::string(expected_kind) + "'", kHeaderBytes);
    const std::size_t payload_at = kHeaderBytes + length;
    if (!c.manifest.contains("payload_bytes") || !c.manifest["payload_bytes"].is_number_unsigned())
        throw FormatError("manifest has no payload_bytes", kHeaderBytes);
    const auto expected = c.manifest["payload_bytes"].get<std::uint64_t>();
    if (bytes.size() - payload_at != expected)
        throw FormatError("payload is " + std::to_string(bytes.size() - payload_at) + " bytes, manifest says " +
                              std::to_string(expected),
                          payload_at);
    c.payload = std::string(bytes.substr(payload_at));
    return c;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path.string());
    return buf.str();
}

void ByteWriter::f32(double v) { put_le(out_, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
void ByteWriter::f64(double v) { put_le(out_, std::bit_cast<std::uint64_t>(v)); }

const char* ByteReader::take(std::size_t n) {
    if (remaining() < n)
        throw FormatError("payload ends early: need " + std::to_string(n) + " bytes", base_ + at_);
    const char* p = bytes_.data() + at_;
    at_ += n;
    return p;
}

double ByteReader::f32() {
    const std::size_t at = base_ + at_;
    const float v = std::bit_cast<float>(get_le<std::uint32_t>(take(4)));
    if (!std::isfinite(v)) throw FormatError("non-finite value in payload", at);
    return v;
}

double ByteReader::f64() {
    const std::size_t at = base_ + at_;
    const double v = std::bit_cast<double>(get_le<std::uint64_t>(take(8)));
    if (!std::isfinite(v)) throw FormatError("non-finite value in payload", at);
    return v;
}

std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    return s;
}

std::uint64_t parse_hex64(const std::string& s) {
    if (s.empty() || s.size() > 16) throw FormatError("bad fingerprint '" + s + "'", 0);
    std::uint64_t v = 0;
    for (char c : s) {
        v <<= 4;
        if (c >= '0' && c <= '9')
            v |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f')
            v |= static_cast<std::uint64_t>(c - 'a' + 10);
        else
            throw FormatError("bad fingerprint '" + s + "'", 0);
    }
    return v;
}

}  // namespace hic
