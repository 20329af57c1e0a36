#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tmdelta/suite.hpp"

namespace tmdelta::ratchet {

using crypto::ChainKey;
using crypto::KeyPair;
using crypto::MessageKey;
using crypto::SharedSecret;
using crypto::Suite;

struct PreKeyBundle {
    Bytes identity_public;
    std::uint32_t signed_prekey_id = 0;
    Bytes signed_prekey_public;
    Bytes signed_prekey_signature;
    std::optional<std::uint32_t> one_time_prekey_id;
    std::optional<Bytes> one_time_prekey_public;
};

// Secrets the responder holds against incoming session-initiating envelopes.
struct PreKeyStore {
    std::uint32_t signed_prekey_id = 0;
    KeyPair signed_prekey;
    std::map<std::uint32_t, KeyPair> one_time;

    Bytes serialize() const;
    static PreKeyStore deserialize(std::span<const std::uint8_t> data);
};

struct PreKeyHeader {
    Bytes identity_public;
    Bytes ephemeral_public;
    std::uint32_t signed_prekey_id = 0;
    std::optional<std::uint32_t> one_time_prekey_id;
};

struct EnvelopeHeader {
    Bytes sender_dh_public;
    std::uint32_t prev_chain_len = 0;
    std::uint32_t index = 0;
    std::optional<PreKeyHeader> prekey;

    // Canonical encoding; doubles as the AEAD associated data so the header
    // is integrity-bound to the ciphertext.
    Bytes serialize() const;
    static EnvelopeHeader deserialize(std::span<const std::uint8_t> data);
};

struct Envelope {
    EnvelopeHeader header;
    Bytes ciphertext;

    Bytes serialize() const;
    static Envelope deserialize(std::span<const std::uint8_t> data);
};

struct SkippedEntry {
    Bytes chain_public;
    std::uint32_t index = 0;
    MessageKey key;
    std::uint64_t inserted_at = 0;  // logical tick
    std::uint64_t seq = 0;          // insertion order
};

struct SessionState {
    SharedSecret root_key;
    std::optional<ChainKey> sending_chain;
    std::optional<ChainKey> receiving_chain;
    KeyPair dh_self;
    Bytes dh_remote;
    std::uint32_t send_count = 0;
    std::uint32_t recv_count = 0;
    std::uint32_t prev_chain_len = 0;
    std::vector<SkippedEntry> skipped;  // insertion-ordered, |skipped| <= skipped_limit
    std::size_t skipped_limit = 1000;
    std::uint64_t skipped_seq = 0;
    // (chain public hex, index) of every envelope already decrypted.
    std::set<std::pair<std::string, std::uint32_t>> consumed;
    // Carried on outgoing envelopes until the first inbound decrypt proves
    // the responder holds the session.
    std::optional<PreKeyHeader> pending_prekey;

    Bytes serialize() const;
    static SessionState deserialize(std::span<const std::uint8_t> data);
};

// Session establishment. The initiator combines identity and pre-key
// agreements into the first root key; the responder mirrors it from the
// first envelope. Throws bad_signature / unknown_prekey per contract.
SessionState init_initiator(const Suite& suite, Rng& rng, const KeyPair& self_identity,
                            const PreKeyBundle& bundle);
std::pair<SessionState, Bytes> init_responder(const Suite& suite, Rng& rng,
                                              const KeyPair& self_identity, PreKeyStore& prekeys,
                                              const Envelope& first_envelope);

std::pair<SessionState, Envelope> ratchet_encrypt(const Suite& suite, const SessionState& state,
                                                  std::span<const std::uint8_t> plaintext);

// In-order messages advance the chain; a fresh sender ratchet key triggers a
// DH step; out-of-order delivery derives-and-caches intervening keys.
// Throws skipped_limit_exceeded / duplicate_message / decryption_failure.
// The input state is untouched when an error is thrown.
std::pair<SessionState, Bytes> ratchet_decrypt(const Suite& suite, Rng& rng,
                                               const SessionState& state, const Envelope& envelope,
                                               std::uint64_t now = 0);

struct TrimPolicy {
    std::optional<std::size_t> max_entries;
    std::optional<std::uint64_t> max_age;  // logical ticks
    std::uint64_t now = 0;
};

SessionState trim_skipped(const SessionState& state, const TrimPolicy& policy);

// Rekeying budget for the cloud-messenger secret-chat session type: fresh
// key pairs after every N messages or T ticks, whichever comes first.
struct RekeyPolicy {
    std::optional<std::uint32_t> every_n_messages;
    std::optional<std::uint64_t> every_ticks;
};

struct SecretChatSession {
    std::string chat_id;
    bool initiator_role = false;
    Key32 shared_key{};
    std::uint32_t key_epoch = 0;
    Bytes dh_self_public;  // this epoch's own ratchet public key
    std::uint32_t messages_under_key = 0;
    std::uint32_t send_index = 0;
    std::uint32_t recv_index = 0;
    std::uint64_t key_epoch_started_at = 0;
    RekeyPolicy policy;

    Bytes serialize() const;
    static SecretChatSession deserialize(std::span<const std::uint8_t> data);
};

struct SecretEnvelope {
    std::string chat_id;
    std::uint32_t key_epoch = 0;
    bool from_initiator = false;
    std::uint32_t index = 0;
    Bytes ciphertext;
};

std::pair<SecretChatSession, SecretChatSession> secret_establish(const Suite& suite, Rng& rng,
                                                                 const std::string& chat_id,
                                                                 const RekeyPolicy& policy,
                                                                 std::uint64_t now);
bool secret_needs_rekey(const SecretChatSession& session, std::uint64_t now);
void secret_rekey(const Suite& suite, Rng& rng, SecretChatSession& a, SecretChatSession& b,
                  std::uint64_t now);
SecretEnvelope secret_encrypt(const Suite& suite, SecretChatSession& session,
                              std::span<const std::uint8_t> plaintext);
Bytes secret_decrypt(const Suite& suite, SecretChatSession& session, const SecretEnvelope& envelope);

}  // namespace tmdelta::ratchet
