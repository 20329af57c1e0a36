#include "tmdelta/suite.hpp"

#include <sodium.h>

#include <cstring>
#include <mutex>

namespace tmdelta {

std::string to_hex(std::span<const std::uint8_t> data) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (std::uint8_t b : data) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0x0F]);
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return 10 + (c - 'a');
        if (c >= 'A' && c <= 'F') return 10 + (c - 'A');
        return -1;
    };
    if (hex.size() % 2 != 0) fail(Errc::decode_error, "odd hex length");
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = nibble(hex[i]);
        int lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) fail(Errc::decode_error, "bad hex digit");
        out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
    }
    return out;
}

void append_u32(Bytes& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void append_u64(Bytes& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void append_field(Bytes& out, std::span<const std::uint8_t> data) {
    append_u32(out, static_cast<std::uint32_t>(data.size()));
    append(out, data);
}

void append_field(Bytes& out, std::string_view s) {
    append_u32(out, static_cast<std::uint32_t>(s.size()));
    append(out, s);
}

std::uint32_t ByteReader::read_u32() {
    if (pos + 4 > data.size()) fail(Errc::decode_error, "u32 past end");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
    pos += 4;
    return v;
}

std::uint64_t ByteReader::read_u64() {
    if (pos + 8 > data.size()) fail(Errc::decode_error, "u64 past end");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
    pos += 8;
    return v;
}

Bytes ByteReader::read_field() {
    std::uint32_t len = read_u32();
    if (pos + len > data.size()) fail(Errc::decode_error, "field past end");
    Bytes out(data.begin() + static_cast<std::ptrdiff_t>(pos),
              data.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
    return out;
}

std::string ByteReader::read_string_field() {
    Bytes b = read_field();
    return std::string(b.begin(), b.end());
}

std::string_view errc_name(Errc code) {
    switch (code) {
        case Errc::malformed_key: return "malformed-key";
        case Errc::bad_signature: return "bad-signature";
        case Errc::unknown_prekey: return "unknown-prekey";
        case Errc::skipped_limit_exceeded: return "skipped-limit-exceeded";
        case Errc::duplicate_message: return "duplicate-message";
        case Errc::decryption_failure: return "decryption-failure";
        case Errc::keystore_locked: return "keystore-locked";
        case Errc::already_linked: return "already-linked";
        case Errc::unauthorized: return "unauthorized";
        case Errc::unknown_companion: return "unknown-companion";
        case Errc::duplicate_account: return "duplicate-account";
        case Errc::bad_credentials: return "bad-credentials";
        case Errc::revoked: return "revoked";
        case Errc::revoked_connection: return "revoked-connection";
        case Errc::unknown_account: return "unknown-account";
        case Errc::not_supported: return "not-supported";
        case Errc::unknown_profile: return "unknown-profile";
        case Errc::config_invalid: return "config-invalid";
        case Errc::phase_mismatch: return "phase-mismatch";
        case Errc::decode_error: return "decode-error";
        case Errc::invalid_argument: return "invalid-argument";
    }
    return "unknown-error";
}

}  // namespace tmdelta

namespace tmdelta::crypto {

namespace {

void ensure_sodium() {
    static std::once_flag flag;
    std::call_once(flag, [] {
        if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
    });
}

Key32 tagged_hash(std::string_view tag, std::initializer_list<std::span<const std::uint8_t>> parts) {
    Bytes buf;
    append(buf, tag);
    buf.push_back(0x00);  // tag terminator keeps domains prefix-free
    for (auto part : parts) append_field(buf, part);
    return sha256(buf);
}

}  // namespace

Key32 sha256(std::span<const std::uint8_t> data) {
    ensure_sodium();
    Key32 out{};
    crypto_hash_sha256(out.data(), data.data(), data.size());
    return out;
}

Fingerprint fingerprint_of(std::span<const std::uint8_t> hardware_tag) {
    return Fingerprint{tagged_hash("tmdelta.fingerprint", {hardware_tag})};
}

std::string suite_kind_name(SuiteKind kind) {
    return kind == SuiteKind::toy ? "toy" : "standard";
}

SuiteKind suite_kind_from_name(std::string_view name) {
    if (name == "toy") return SuiteKind::toy;
    if (name == "standard") return SuiteKind::standard;
    fail(Errc::config_invalid, "unknown suite '" + std::string(name) + "'");
}

namespace toy {

std::uint64_t modexp(std::uint64_t base, std::uint64_t exp, std::uint64_t mod) {
    std::uint64_t result = 1 % mod;
    base %= mod;
    while (exp > 0) {
        if (exp & 1) result = (result * base) % mod;  // operands < 2^31, no overflow
        base = (base * base) % mod;
        exp >>= 1;
    }
    return result;
}

std::uint64_t scalar_of(const Bytes& secret) {
    if (secret.size() != 32) fail(Errc::malformed_key, "toy secret must be 32 bytes");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(secret[i]) << (8 * i);
    v %= (kPrime - 1);
    return v == 0 ? 1 : v;
}

std::uint64_t element_of(const Bytes& encoded) {
    if (encoded.size() != 32) fail(Errc::malformed_key, "toy element must be 32 bytes");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(encoded[i]) << (8 * i);
    for (std::size_t i = 8; i < 32; ++i) {
        if (encoded[i] != 0) fail(Errc::malformed_key, "toy element padding not zero");
    }
    if (v == 0 || v >= kPrime) fail(Errc::malformed_key, "toy element out of range");
    return v;
}

Bytes encode_element(std::uint64_t element) {
    Bytes out(32, 0);
    for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>((element >> (8 * i)) & 0xFF);
    return out;
}

}  // namespace toy

namespace {

// --- toy suite -------------------------------------------------------------

class ToySuite final : public Suite {
public:
    SuiteKind kind() const override { return SuiteKind::toy; }

    KeyPair keygen(Rng& rng) const override {
        Bytes secret(32, 0);
        rng.fill(secret);
        return KeyPair{derive_public(secret), secret};
    }

    Bytes derive_public(const Bytes& secret) const override {
        std::uint64_t x = toy::scalar_of(secret);
        return toy::encode_element(toy::modexp(toy::kGenerator, x, toy::kPrime));
    }

    SharedSecret dh(const Bytes& secret, const Bytes& peer_public) const override {
        std::uint64_t x = toy::scalar_of(secret);
        std::uint64_t elem = toy::element_of(peer_public);
        Bytes shared = toy::encode_element(toy::modexp(elem, x, toy::kPrime));
        SharedSecret out;
        std::copy(shared.begin(), shared.end(), out.bytes.begin());
        return out;
    }

    std::pair<SharedSecret, ChainKey> kdf_root(const SharedSecret& root,
                                               const SharedSecret& dh_out) const override {
        SharedSecret next{tagged_hash("tmdelta.toy.kdf_root.root", {root.bytes, dh_out.bytes})};
        ChainKey chain{tagged_hash("tmdelta.toy.kdf_root.chain", {root.bytes, dh_out.bytes}), 0};
        return {next, chain};
    }

    std::pair<ChainKey, MessageKey> kdf_chain(const ChainKey& chain) const override {
        ChainKey next{tagged_hash("tmdelta.toy.kdf_chain.next", {chain.bytes}), chain.index + 1};
        MessageKey mk{tagged_hash("tmdelta.toy.kdf_chain.msg", {chain.bytes}), chain.index};
        return {next, mk};
    }

    Bytes aead_seal(const Key32& key, std::span<const std::uint8_t> plaintext,
                    std::span<const std::uint8_t> ad) const override {
        Bytes ct(plaintext.begin(), plaintext.end());
        xor_keystream(key, ct);
        Key32 tag = tagged_hash("tmdelta.toy.aead.tag", {key, ad, ct});
        Bytes out = std::move(ct);
        out.insert(out.end(), tag.begin(), tag.begin() + 16);
        return out;
    }

    std::optional<Bytes> aead_open(const Key32& key, std::span<const std::uint8_t> ciphertext,
                                   std::span<const std::uint8_t> ad) const override {
        if (ciphertext.size() < 16) return std::nullopt;
        auto ct = ciphertext.first(ciphertext.size() - 16);
        auto tag = ciphertext.last(16);
        Key32 expect = tagged_hash("tmdelta.toy.aead.tag", {key, ad, ct});
        if (!std::equal(tag.begin(), tag.end(), expect.begin())) return std::nullopt;
        Bytes pt(ct.begin(), ct.end());
        xor_keystream(key, pt);
        return pt;
    }

    // Schnorr over the toy group; exponent arithmetic mod p-1 is sound
    // because ord(g) divides p-1.
    Bytes sign(const Bytes& secret, std::span<const std::uint8_t> message) const override {
        const std::uint64_t order = toy::kPrime - 1;
        std::uint64_t x = toy::scalar_of(secret);
        Key32 nh = tagged_hash("tmdelta.toy.sig.nonce", {secret, message});
        std::uint64_t k = read_u64_le(nh) % order;
        if (k == 0) k = 1;
        std::uint64_t r = toy::modexp(toy::kGenerator, k, toy::kPrime);
        std::uint64_t e = challenge(r, message);
        std::uint64_t s = (k + order - (x * e) % order) % order;
        Bytes sig;
        append_u64(sig, e);
        append_u64(sig, s);
        return sig;
    }

    bool verify(std::span<const std::uint8_t> signature, const Bytes& public_key,
                std::span<const std::uint8_t> message) const override {
        if (signature.size() != 16) return false;
        std::uint64_t e = 0, s = 0;
        for (int i = 0; i < 8; ++i) e |= static_cast<std::uint64_t>(signature[i]) << (8 * i);
        for (int i = 0; i < 8; ++i) s |= static_cast<std::uint64_t>(signature[8 + i]) << (8 * i);
        std::uint64_t y = 0;
        try {
            y = toy::element_of(public_key);
        } catch (const SimError&) {
            return false;
        }
        if (e >= toy::kPrime - 1 || s >= toy::kPrime - 1) return false;
        std::uint64_t r = (toy::modexp(toy::kGenerator, s, toy::kPrime) *
                           toy::modexp(y, e, toy::kPrime)) %
                          toy::kPrime;
        return challenge(r, message) == e;
    }

    Key32 hash(std::span<const std::uint8_t> data) const override { return sha256(data); }

private:
    static std::uint64_t read_u64_le(const Key32& h) {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(h[i]) << (8 * i);
        return v;
    }

    static std::uint64_t challenge(std::uint64_t r, std::span<const std::uint8_t> message) {
        Bytes rb = toy::encode_element(r);
        Key32 h = tagged_hash("tmdelta.toy.sig.challenge", {rb, message});
        std::uint64_t e = read_u64_le(h) % (toy::kPrime - 1);
        return e == 0 ? 1 : e;
    }

    static void xor_keystream(const Key32& key, Bytes& buf) {
        for (std::size_t block = 0, off = 0; off < buf.size(); ++block, off += 32) {
            Bytes ctr;
            append_u64(ctr, block);
            Key32 ks = tagged_hash("tmdelta.toy.aead.keystream", {key, ctr});
            for (std::size_t i = 0; i < 32 && off + i < buf.size(); ++i) buf[off + i] ^= ks[i];
        }
    }
};

// --- standard suite ----------------------------------------------------------

// KeyPair layout: secret is a 32-byte seed driving both halves; public is
// X25519(seed) || Ed25519_pk(seed), 64 bytes.
class StandardSuite final : public Suite {
public:
    StandardSuite() { ensure_sodium(); }

    SuiteKind kind() const override { return SuiteKind::standard; }

    KeyPair keygen(Rng& rng) const override {
        Bytes secret(32, 0);
        rng.fill(secret);
        return KeyPair{derive_public(secret), secret};
    }

    Bytes derive_public(const Bytes& secret) const override {
        if (secret.size() != 32) fail(Errc::malformed_key, "secret must be 32 bytes");
        Bytes out(64, 0);
        crypto_scalarmult_base(out.data(), secret.data());
        unsigned char ed_pk[crypto_sign_PUBLICKEYBYTES];
        unsigned char ed_sk[crypto_sign_SECRETKEYBYTES];
        crypto_sign_seed_keypair(ed_pk, ed_sk, secret.data());
        std::memcpy(out.data() + 32, ed_pk, 32);
        sodium_memzero(ed_sk, sizeof ed_sk);
        return out;
    }

    SharedSecret dh(const Bytes& secret, const Bytes& peer_public) const override {
        if (secret.size() != 32) fail(Errc::malformed_key, "secret must be 32 bytes");
        if (peer_public.size() != 64) fail(Errc::malformed_key, "public must be 64 bytes");
        SharedSecret out;
        if (crypto_scalarmult(out.bytes.data(), secret.data(), peer_public.data()) != 0) {
            fail(Errc::malformed_key, "low-order point");
        }
        return out;
    }

    std::pair<SharedSecret, ChainKey> kdf_root(const SharedSecret& root,
                                               const SharedSecret& dh_out) const override {
        Key32 prk = hmac(root.bytes, dh_out.bytes);
        SharedSecret next{hmac_tag(prk, "tmdelta.std.kdf_root.root")};
        ChainKey chain{hmac_tag(prk, "tmdelta.std.kdf_root.chain"), 0};
        return {next, chain};
    }

    std::pair<ChainKey, MessageKey> kdf_chain(const ChainKey& chain) const override {
        ChainKey next{hmac_tag(chain.bytes, "tmdelta.std.kdf_chain.next"), chain.index + 1};
        MessageKey mk{hmac_tag(chain.bytes, "tmdelta.std.kdf_chain.msg"), chain.index};
        return {next, mk};
    }

    Bytes aead_seal(const Key32& key, std::span<const std::uint8_t> plaintext,
                    std::span<const std::uint8_t> ad) const override {
        auto nonce = derive_nonce(key, ad);
        Bytes out(plaintext.size() + crypto_aead_xchacha20poly1305_ietf_ABYTES);
        unsigned long long out_len = 0;
        crypto_aead_xchacha20poly1305_ietf_encrypt(out.data(), &out_len, plaintext.data(),
                                                   plaintext.size(), ad.data(), ad.size(), nullptr,
                                                   nonce.data(), key.data());
        out.resize(out_len);
        return out;
    }

    std::optional<Bytes> aead_open(const Key32& key, std::span<const std::uint8_t> ciphertext,
                                   std::span<const std::uint8_t> ad) const override {
        if (ciphertext.size() < crypto_aead_xchacha20poly1305_ietf_ABYTES) return std::nullopt;
        auto nonce = derive_nonce(key, ad);
        Bytes out(ciphertext.size() - crypto_aead_xchacha20poly1305_ietf_ABYTES);
        unsigned long long out_len = 0;
        if (crypto_aead_xchacha20poly1305_ietf_decrypt(out.data(), &out_len, nullptr,
                                                       ciphertext.data(), ciphertext.size(),
                                                       ad.data(), ad.size(), nonce.data(),
                                                       key.data()) != 0) {
            return std::nullopt;
        }
        out.resize(out_len);
        return out;
    }

    Bytes sign(const Bytes& secret, std::span<const std::uint8_t> message) const override {
        if (secret.size() != 32) fail(Errc::malformed_key, "secret must be 32 bytes");
        unsigned char ed_pk[crypto_sign_PUBLICKEYBYTES];
        unsigned char ed_sk[crypto_sign_SECRETKEYBYTES];
        crypto_sign_seed_keypair(ed_pk, ed_sk, secret.data());
        Bytes sig(crypto_sign_BYTES);
        unsigned long long sig_len = 0;
        crypto_sign_detached(sig.data(), &sig_len, message.data(), message.size(), ed_sk);
        sodium_memzero(ed_sk, sizeof ed_sk);
        sig.resize(sig_len);
        return sig;
    }

    bool verify(std::span<const std::uint8_t> signature, const Bytes& public_key,
                std::span<const std::uint8_t> message) const override {
        if (signature.size() != crypto_sign_BYTES || public_key.size() != 64) return false;
        return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                           public_key.data() + 32) == 0;
    }

    Key32 hash(std::span<const std::uint8_t> data) const override { return sha256(data); }

private:
    static Key32 hmac(const Key32& key, std::span<const std::uint8_t> data) {
        Key32 out{};
        crypto_auth_hmacsha256_state st;
        crypto_auth_hmacsha256_init(&st, key.data(), key.size());
        crypto_auth_hmacsha256_update(&st, data.data(), data.size());
        crypto_auth_hmacsha256_final(&st, out.data());
        return out;
    }

    static Key32 hmac_tag(const Key32& key, std::string_view tag) {
        Bytes t = to_bytes(tag);
        return hmac(key, t);
    }

    static std::array<std::uint8_t, crypto_aead_xchacha20poly1305_ietf_NPUBBYTES> derive_nonce(
        const Key32& key, std::span<const std::uint8_t> ad) {
        Key32 h = tagged_hash("tmdelta.std.aead.nonce", {key, ad});
        std::array<std::uint8_t, crypto_aead_xchacha20poly1305_ietf_NPUBBYTES> nonce{};
        std::copy_n(h.begin(), nonce.size(), nonce.begin());
        return nonce;
    }
};

}  // namespace

const Suite& suite_for(SuiteKind kind) {
    static const ToySuite toy_suite;
    static const StandardSuite standard_suite;
    if (kind == SuiteKind::toy) return toy_suite;
    return standard_suite;
}

}  // namespace tmdelta::crypto
