#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "tmdelta/bytes.hpp"

namespace tmdelta {

// The single source of randomness in a simulation. mt19937_64 is pinned by
// the standard, so a fixed seed replays bit-exactly on every platform.
// Distribution adapters are avoided on purpose: they are not portable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    std::uint32_t next_u32() { return static_cast<std::uint32_t>(engine_() >> 32); }

    // Modulo bias is irrelevant at simulation scale.
    std::uint64_t below(std::uint64_t bound) {
        return bound == 0 ? 0 : next_u64() % bound;
    }

    bool coin() { return (next_u64() & 1u) != 0; }

    void fill(std::span<std::uint8_t> out) {
        std::size_t i = 0;
        while (i < out.size()) {
            std::uint64_t v = next_u64();
            for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
                out[i] = static_cast<std::uint8_t>(v & 0xFF);
                v >>= 8;
            }
        }
    }

    Bytes bytes(std::size_t n) {
        Bytes out(n);
        fill(out);
        return out;
    }

    Key32 key32() {
        Key32 out{};
        fill(out);
        return out;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace tmdelta
