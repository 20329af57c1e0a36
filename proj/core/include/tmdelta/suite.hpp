#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "tmdelta/bytes.hpp"
#include "tmdelta/errors.hpp"
#include "tmdelta/rng.hpp"

namespace tmdelta::crypto {

struct KeyPair {
    Bytes public_key;
    Bytes secret_key;  // 32 bytes in both suites
};

struct SharedSecret {
    Key32 bytes{};
    friend bool operator==(const SharedSecret&, const SharedSecret&) = default;
};

struct ChainKey {
    Key32 bytes{};
    std::uint32_t index = 0;
    friend bool operator==(const ChainKey&, const ChainKey&) = default;
};

struct MessageKey {
    Key32 bytes{};
    std::uint32_t index = 0;
    friend bool operator==(const MessageKey&, const MessageKey&) = default;
};

struct Fingerprint {
    Key32 digest{};
    friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

enum class SuiteKind { toy, standard };

std::string suite_kind_name(SuiteKind kind);
SuiteKind suite_kind_from_name(std::string_view name);

// Primitive suite behind which every higher layer is cipher-agnostic.
//
// "toy" runs a Schnorr-style group over the Mersenne prime 2^31-1 with
// hash-derived KDF/AEAD, small enough that independent brute-force oracles
// can check it. "standard" is X25519 + HMAC-SHA256 + XChaCha20-Poly1305 +
// Ed25519 via libsodium. Both are fully deterministic given a seeded Rng;
// AEAD nonces are derived from (key, ad) because message keys are single-use.
class Suite {
public:
    virtual ~Suite() = default;

    virtual SuiteKind kind() const = 0;
    std::string name() const { return suite_kind_name(kind()); }

    virtual KeyPair keygen(Rng& rng) const = 0;
    virtual Bytes derive_public(const Bytes& secret) const = 0;

    // Throws Errc::malformed_key on wrong-length or out-of-range input.
    virtual SharedSecret dh(const Bytes& secret, const Bytes& peer_public) const = 0;

    virtual std::pair<SharedSecret, ChainKey> kdf_root(const SharedSecret& root,
                                                       const SharedSecret& dh_out) const = 0;
    virtual std::pair<ChainKey, MessageKey> kdf_chain(const ChainKey& chain) const = 0;

    virtual Bytes aead_seal(const Key32& key, std::span<const std::uint8_t> plaintext,
                            std::span<const std::uint8_t> ad) const = 0;
    // nullopt on any authentication failure; never throws.
    virtual std::optional<Bytes> aead_open(const Key32& key,
                                           std::span<const std::uint8_t> ciphertext,
                                           std::span<const std::uint8_t> ad) const = 0;

    virtual Bytes sign(const Bytes& secret, std::span<const std::uint8_t> message) const = 0;
    // Malformed signatures verify false, they do not throw.
    virtual bool verify(std::span<const std::uint8_t> signature, const Bytes& public_key,
                        std::span<const std::uint8_t> message) const = 0;

    virtual Key32 hash(std::span<const std::uint8_t> data) const = 0;
};

const Suite& suite_for(SuiteKind kind);

// SHA-256, shared by both suites and by suite-independent code paths.
Key32 sha256(std::span<const std::uint8_t> data);

// Device fingerprint: digest of the hardware tag. Keystores in
// device_bound_key mode open only where this matches.
Fingerprint fingerprint_of(std::span<const std::uint8_t> hardware_tag);

namespace toy {
inline constexpr std::uint64_t kPrime = 2147483647;  // 2^31 - 1
inline constexpr std::uint64_t kGenerator = 5;

std::uint64_t scalar_of(const Bytes& secret);
std::uint64_t element_of(const Bytes& encoded);  // throws malformed_key
Bytes encode_element(std::uint64_t element);
std::uint64_t modexp(std::uint64_t base, std::uint64_t exp, std::uint64_t mod);
}  // namespace toy

}  // namespace tmdelta::crypto
