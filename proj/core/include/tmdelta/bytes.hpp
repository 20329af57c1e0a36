#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tmdelta {

using Bytes = std::vector<std::uint8_t>;
using Key32 = std::array<std::uint8_t, 32>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline std::string to_string(std::span<const std::uint8_t> b) {
    return std::string(b.begin(), b.end());
}

std::string to_hex(std::span<const std::uint8_t> data);
Bytes from_hex(std::string_view hex);

inline void append(Bytes& out, std::span<const std::uint8_t> data) {
    out.insert(out.end(), data.begin(), data.end());
}

inline void append(Bytes& out, std::string_view s) {
    out.insert(out.end(), s.begin(), s.end());
}

void append_u32(Bytes& out, std::uint32_t v);
void append_u64(Bytes& out, std::uint64_t v);

// Length-prefixed field helpers used by every canonical serializer in the
// project. Little-endian, u32 length prefix.
void append_field(Bytes& out, std::span<const std::uint8_t> data);
void append_field(Bytes& out, std::string_view s);

// Cursor-based reader; throws SimError(config_invalid-like decode errors are
// reported as std::out_of_range by callers that care).
struct ByteReader {
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;

    bool done() const { return pos >= data.size(); }
    std::uint32_t read_u32();
    std::uint64_t read_u64();
    Bytes read_field();
    std::string read_string_field();
};

}  // namespace tmdelta
