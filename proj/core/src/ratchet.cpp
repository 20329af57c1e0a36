#include "tmdelta/ratchet.hpp"

#include <algorithm>

namespace tmdelta::ratchet {

namespace {

Key32 x3dh_root(const Suite& suite, const std::vector<SharedSecret>& parts) {
    Bytes buf;
    append(buf, "tmdelta.session.root");
    buf.push_back(0x00);
    for (const auto& p : parts) append_field(buf, p.bytes);
    return suite.hash(buf);
}

std::pair<std::string, std::uint32_t> coord_of(const EnvelopeHeader& header) {
    return {to_hex(header.sender_dh_public), header.index};
}

void cache_skipped(SessionState& state, MessageKey key, std::uint64_t now) {
    state.skipped.push_back(SkippedEntry{state.dh_remote, key.index, key, now, state.skipped_seq++});
    while (state.skipped.size() > state.skipped_limit) state.skipped.erase(state.skipped.begin());
}

// Derives and caches receiving-chain keys up to (not including) target.
void skip_recv_keys(const Suite& suite, SessionState& state, std::uint32_t target,
                    std::uint64_t now) {
    if (target > state.recv_count &&
        static_cast<std::size_t>(target - state.recv_count) > state.skipped_limit) {
        fail(Errc::skipped_limit_exceeded,
             "gap of " + std::to_string(target - state.recv_count) + " exceeds limit " +
                 std::to_string(state.skipped_limit));
    }
    while (state.recv_count < target) {
        auto [next, mk] = suite.kdf_chain(*state.receiving_chain);
        cache_skipped(state, mk, now);
        state.receiving_chain = next;
        state.recv_count += 1;
    }
}

}  // namespace

Bytes EnvelopeHeader::serialize() const {
    Bytes out;
    append_field(out, sender_dh_public);
    append_u32(out, prev_chain_len);
    append_u32(out, index);
    out.push_back(prekey ? 1 : 0);
    if (prekey) {
        append_field(out, prekey->identity_public);
        append_field(out, prekey->ephemeral_public);
        append_u32(out, prekey->signed_prekey_id);
        out.push_back(prekey->one_time_prekey_id ? 1 : 0);
        if (prekey->one_time_prekey_id) append_u32(out, *prekey->one_time_prekey_id);
    }
    return out;
}

EnvelopeHeader EnvelopeHeader::deserialize(std::span<const std::uint8_t> data) {
    ByteReader r{data};
    EnvelopeHeader h;
    h.sender_dh_public = r.read_field();
    h.prev_chain_len = r.read_u32();
    h.index = r.read_u32();
    if (r.pos >= data.size()) fail(Errc::decode_error, "header truncated");
    bool has_prekey = data[r.pos++] != 0;
    if (has_prekey) {
        PreKeyHeader pk;
        pk.identity_public = r.read_field();
        pk.ephemeral_public = r.read_field();
        pk.signed_prekey_id = r.read_u32();
        if (r.pos >= data.size()) fail(Errc::decode_error, "pre-key header truncated");
        bool has_otp = data[r.pos++] != 0;
        if (has_otp) pk.one_time_prekey_id = r.read_u32();
        h.prekey = std::move(pk);
    }
    return h;
}

Bytes Envelope::serialize() const {
    Bytes out;
    Bytes h = header.serialize();
    append_field(out, h);
    append_field(out, ciphertext);
    return out;
}

Envelope Envelope::deserialize(std::span<const std::uint8_t> data) {
    ByteReader r{data};
    Bytes h = r.read_field();
    Envelope env;
    env.header = EnvelopeHeader::deserialize(h);
    env.ciphertext = r.read_field();
    return env;
}

Bytes SessionState::serialize() const {
    Bytes out;
    append_field(out, root_key.bytes);
    out.push_back(sending_chain ? 1 : 0);
    if (sending_chain) {
        append_field(out, sending_chain->bytes);
        append_u32(out, sending_chain->index);
    }
    out.push_back(receiving_chain ? 1 : 0);
    if (receiving_chain) {
        append_field(out, receiving_chain->bytes);
        append_u32(out, receiving_chain->index);
    }
    append_field(out, dh_self.public_key);
    append_field(out, dh_self.secret_key);
    append_field(out, dh_remote);
    append_u32(out, send_count);
    append_u32(out, recv_count);
    append_u32(out, prev_chain_len);
    append_u64(out, skipped_limit);
    append_u32(out, static_cast<std::uint32_t>(skipped.size()));
    for (const auto& entry : skipped) {
        append_field(out, entry.chain_public);
        append_u32(out, entry.index);
        append_field(out, entry.key.bytes);
        append_u64(out, entry.inserted_at);
        append_u64(out, entry.seq);
    }
    append_u32(out, static_cast<std::uint32_t>(consumed.size()));
    for (const auto& [chain, index] : consumed) {
        append_field(out, chain);
        append_u32(out, index);
    }
    append_u64(out, skipped_seq);
    out.push_back(pending_prekey ? 1 : 0);
    if (pending_prekey) {
        append_field(out, pending_prekey->identity_public);
        append_field(out, pending_prekey->ephemeral_public);
        append_u32(out, pending_prekey->signed_prekey_id);
        out.push_back(pending_prekey->one_time_prekey_id ? 1 : 0);
        if (pending_prekey->one_time_prekey_id) append_u32(out, *pending_prekey->one_time_prekey_id);
    }
    return out;
}

SessionState SessionState::deserialize(std::span<const std::uint8_t> data) {
    ByteReader r{data};
    SessionState s;
    auto read_key32 = [&](Key32& out) {
        Bytes b = r.read_field();
        if (b.size() != 32) fail(Errc::decode_error, "key field must be 32 bytes");
        std::copy(b.begin(), b.end(), out.begin());
    };
    auto read_bool = [&]() {
        if (r.pos >= data.size()) fail(Errc::decode_error, "bool past end");
        return data[r.pos++] != 0;
    };
    read_key32(s.root_key.bytes);
    if (read_bool()) {
        ChainKey ck;
        read_key32(ck.bytes);
        ck.index = r.read_u32();
        s.sending_chain = ck;
    }
    if (read_bool()) {
        ChainKey ck;
        read_key32(ck.bytes);
        ck.index = r.read_u32();
        s.receiving_chain = ck;
    }
    s.dh_self.public_key = r.read_field();
    s.dh_self.secret_key = r.read_field();
    s.dh_remote = r.read_field();
    s.send_count = r.read_u32();
    s.recv_count = r.read_u32();
    s.prev_chain_len = r.read_u32();
    s.skipped_limit = r.read_u64();
    std::uint32_t n_skipped = r.read_u32();
    for (std::uint32_t i = 0; i < n_skipped; ++i) {
        SkippedEntry e;
        e.chain_public = r.read_field();
        e.index = r.read_u32();
        read_key32(e.key.bytes);
        e.key.index = e.index;
        e.inserted_at = r.read_u64();
        e.seq = r.read_u64();
        s.skipped.push_back(std::move(e));
    }
    std::uint32_t n_consumed = r.read_u32();
    for (std::uint32_t i = 0; i < n_consumed; ++i) {
        std::string chain = r.read_string_field();
        std::uint32_t index = r.read_u32();
        s.consumed.insert({std::move(chain), index});
    }
    s.skipped_seq = r.read_u64();
    if (read_bool()) {
        PreKeyHeader pk;
        pk.identity_public = r.read_field();
        pk.ephemeral_public = r.read_field();
        pk.signed_prekey_id = r.read_u32();
        if (read_bool()) pk.one_time_prekey_id = r.read_u32();
        s.pending_prekey = std::move(pk);
    }
    return s;
}

Bytes PreKeyStore::serialize() const {
    Bytes out;
    append_u32(out, signed_prekey_id);
    append_field(out, signed_prekey.public_key);
    append_field(out, signed_prekey.secret_key);
    append_u32(out, static_cast<std::uint32_t>(one_time.size()));
    for (const auto& [id, kp] : one_time) {
        append_u32(out, id);
        append_field(out, kp.public_key);
        append_field(out, kp.secret_key);
    }
    return out;
}

PreKeyStore PreKeyStore::deserialize(std::span<const std::uint8_t> data) {
    ByteReader r{data};
    PreKeyStore p;
    p.signed_prekey_id = r.read_u32();
    p.signed_prekey.public_key = r.read_field();
    p.signed_prekey.secret_key = r.read_field();
    std::uint32_t n = r.read_u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t id = r.read_u32();
        KeyPair kp;
        kp.public_key = r.read_field();
        kp.secret_key = r.read_field();
        p.one_time.emplace(id, std::move(kp));
    }
    return p;
}

SessionState init_initiator(const Suite& suite, Rng& rng, const KeyPair& self_identity,
                            const PreKeyBundle& bundle) {
    if (!suite.verify(bundle.signed_prekey_signature, bundle.identity_public,
                      bundle.signed_prekey_public)) {
        fail(Errc::bad_signature, "pre-key signature does not verify");
    }
    KeyPair ephemeral = suite.keygen(rng);

    std::vector<SharedSecret> parts;
    parts.push_back(suite.dh(self_identity.secret_key, bundle.signed_prekey_public));
    parts.push_back(suite.dh(ephemeral.secret_key, bundle.identity_public));
    parts.push_back(suite.dh(ephemeral.secret_key, bundle.signed_prekey_public));
    if (bundle.one_time_prekey_public) {
        parts.push_back(suite.dh(ephemeral.secret_key, *bundle.one_time_prekey_public));
    }

    SessionState state;
    state.root_key = SharedSecret{x3dh_root(suite, parts)};
    state.dh_self = suite.keygen(rng);
    state.dh_remote = bundle.signed_prekey_public;
    auto dh_out = suite.dh(state.dh_self.secret_key, state.dh_remote);
    auto [root, chain] = suite.kdf_root(state.root_key, dh_out);
    state.root_key = root;
    state.sending_chain = chain;
    state.pending_prekey = PreKeyHeader{self_identity.public_key, ephemeral.public_key,
                                        bundle.signed_prekey_id, bundle.one_time_prekey_id};
    return state;
}

std::pair<SessionState, Bytes> init_responder(const Suite& suite, Rng& rng,
                                              const KeyPair& self_identity, PreKeyStore& prekeys,
                                              const Envelope& first_envelope) {
    const auto& header = first_envelope.header;
    if (!header.prekey) fail(Errc::unknown_prekey, "envelope carries no pre-key header");
    const PreKeyHeader& pk = *header.prekey;
    if (pk.signed_prekey_id != prekeys.signed_prekey_id) {
        fail(Errc::unknown_prekey, "signed pre-key id " + std::to_string(pk.signed_prekey_id));
    }
    std::optional<KeyPair> one_time;
    if (pk.one_time_prekey_id) {
        auto it = prekeys.one_time.find(*pk.one_time_prekey_id);
        if (it == prekeys.one_time.end()) {
            fail(Errc::unknown_prekey, "one-time pre-key id " + std::to_string(*pk.one_time_prekey_id));
        }
        one_time = it->second;
    }

    std::vector<SharedSecret> parts;
    parts.push_back(suite.dh(prekeys.signed_prekey.secret_key, pk.identity_public));
    parts.push_back(suite.dh(self_identity.secret_key, pk.ephemeral_public));
    parts.push_back(suite.dh(prekeys.signed_prekey.secret_key, pk.ephemeral_public));
    if (one_time) parts.push_back(suite.dh(one_time->secret_key, pk.ephemeral_public));

    SessionState state;
    state.root_key = SharedSecret{x3dh_root(suite, parts)};
    state.dh_self = prekeys.signed_prekey;

    auto [next_state, plaintext] = ratchet_decrypt(suite, rng, state, first_envelope);
    // one-time pre-keys are consumed on use
    if (pk.one_time_prekey_id) prekeys.one_time.erase(*pk.one_time_prekey_id);
    return {std::move(next_state), std::move(plaintext)};
}

std::pair<SessionState, Envelope> ratchet_encrypt(const Suite& suite, const SessionState& state,
                                                  std::span<const std::uint8_t> plaintext) {
    if (!state.sending_chain) fail(Errc::invalid_argument, "session has no sending chain");
    SessionState next = state;
    auto [chain, mk] = suite.kdf_chain(*next.sending_chain);

    Envelope env;
    env.header.sender_dh_public = next.dh_self.public_key;
    env.header.prev_chain_len = next.prev_chain_len;
    env.header.index = next.send_count;
    env.header.prekey = next.pending_prekey;
    Bytes ad = env.header.serialize();
    env.ciphertext = suite.aead_seal(mk.bytes, plaintext, ad);

    next.sending_chain = chain;  // the used message key is not retained
    next.send_count += 1;
    return {std::move(next), std::move(env)};
}

std::pair<SessionState, Bytes> ratchet_decrypt(const Suite& suite, Rng& rng,
                                               const SessionState& state, const Envelope& envelope,
                                               std::uint64_t now) {
    const EnvelopeHeader& header = envelope.header;
    const Bytes ad = header.serialize();
    const auto coord = coord_of(header);

    SessionState next = state;

    // Cached key from an out-of-order delivery.
    auto cached = std::find_if(next.skipped.begin(), next.skipped.end(), [&](const SkippedEntry& e) {
        return e.index == header.index && e.chain_public == header.sender_dh_public;
    });
    if (cached != next.skipped.end()) {
        auto plaintext = suite.aead_open(cached->key.bytes, envelope.ciphertext, ad);
        if (!plaintext) fail(Errc::decryption_failure, "cached key does not open envelope");
        next.skipped.erase(cached);
        next.consumed.insert(coord);
        next.pending_prekey.reset();
        return {std::move(next), std::move(*plaintext)};
    }

    if (next.consumed.contains(coord)) {
        fail(Errc::duplicate_message, "index " + std::to_string(header.index) + " already consumed");
    }

    if (header.sender_dh_public != next.dh_remote) {
        // New remote ratchet key: close out the current receiving chain, then step.
        if (next.receiving_chain) skip_recv_keys(suite, next, header.prev_chain_len, now);

        auto dh_recv = suite.dh(next.dh_self.secret_key, header.sender_dh_public);
        auto [root_after_recv, recv_chain] = suite.kdf_root(next.root_key, dh_recv);
        next.prev_chain_len = next.send_count;
        next.dh_remote = header.sender_dh_public;
        next.receiving_chain = recv_chain;
        next.recv_count = 0;

        next.dh_self = suite.keygen(rng);
        auto dh_send = suite.dh(next.dh_self.secret_key, next.dh_remote);
        auto [root_after_send, send_chain] = suite.kdf_root(root_after_recv, dh_send);
        next.root_key = root_after_send;
        next.sending_chain = send_chain;
        next.send_count = 0;
    } else if (header.index < next.recv_count) {
        // Same chain, already advanced past it, and it is not in the cache:
        // either evicted by a trim or never sent.
        fail(Errc::decryption_failure, "message key no longer derivable");
    }

    skip_recv_keys(suite, next, header.index, now);
    auto [chain, mk] = suite.kdf_chain(*next.receiving_chain);
    auto plaintext = suite.aead_open(mk.bytes, envelope.ciphertext, ad);
    if (!plaintext) fail(Errc::decryption_failure, "envelope does not authenticate");
    next.receiving_chain = chain;
    next.recv_count = header.index + 1;
    next.consumed.insert(coord);
    next.pending_prekey.reset();
    return {std::move(next), std::move(*plaintext)};
}

SessionState trim_skipped(const SessionState& state, const TrimPolicy& policy) {
    SessionState next = state;
    if (policy.max_age) {
        std::erase_if(next.skipped, [&](const SkippedEntry& e) {
            return e.inserted_at + *policy.max_age < policy.now;
        });
    }
    if (policy.max_entries && next.skipped.size() > *policy.max_entries) {
        // entries are insertion-ordered, oldest first
        next.skipped.erase(next.skipped.begin(),
                           next.skipped.begin() +
                               static_cast<std::ptrdiff_t>(next.skipped.size() - *policy.max_entries));
    }
    return next;
}

// --- secret chats ------------------------------------------------------------

namespace {

Key32 secret_message_key(const Suite& suite, const SecretChatSession& session, bool from_initiator,
                         std::uint32_t index) {
    Bytes buf;
    append(buf, "tmdelta.secretchat.msg");
    buf.push_back(0x00);
    append_field(buf, session.shared_key);
    append_u32(buf, session.key_epoch);
    buf.push_back(from_initiator ? 1 : 0);
    append_u32(buf, index);
    return suite.hash(buf);
}

Bytes secret_ad(const SecretEnvelope& env) {
    Bytes ad;
    append_field(ad, env.chat_id);
    append_u32(ad, env.key_epoch);
    ad.push_back(env.from_initiator ? 1 : 0);
    append_u32(ad, env.index);
    return ad;
}

void exchange_keys(const Suite& suite, Rng& rng, SecretChatSession& a, SecretChatSession& b,
                   std::uint64_t now) {
    KeyPair pa = suite.keygen(rng);
    KeyPair pb = suite.keygen(rng);
    SharedSecret shared = suite.dh(pa.secret_key, pb.public_key);
    Bytes buf;
    append(buf, "tmdelta.secretchat.key");
    buf.push_back(0x00);
    append_field(buf, shared.bytes);
    append_field(buf, a.chat_id);
    Key32 key = suite.hash(buf);
    for (SecretChatSession* s : {&a, &b}) {
        s->shared_key = key;
        s->messages_under_key = 0;
        s->send_index = 0;
        s->recv_index = 0;
        s->key_epoch_started_at = now;
    }
    a.dh_self_public = pa.public_key;
    b.dh_self_public = pb.public_key;
}

}  // namespace

Bytes SecretChatSession::serialize() const {
    Bytes out;
    append_field(out, chat_id);
    out.push_back(initiator_role ? 1 : 0);
    append_field(out, shared_key);
    append_u32(out, key_epoch);
    append_field(out, dh_self_public);
    append_u32(out, messages_under_key);
    append_u32(out, send_index);
    append_u32(out, recv_index);
    append_u64(out, key_epoch_started_at);
    out.push_back(policy.every_n_messages ? 1 : 0);
    if (policy.every_n_messages) append_u32(out, *policy.every_n_messages);
    out.push_back(policy.every_ticks ? 1 : 0);
    if (policy.every_ticks) append_u64(out, *policy.every_ticks);
    return out;
}

SecretChatSession SecretChatSession::deserialize(std::span<const std::uint8_t> data) {
    ByteReader r{data};
    SecretChatSession s;
    auto read_bool = [&]() {
        if (r.pos >= data.size()) fail(Errc::decode_error, "bool past end");
        return data[r.pos++] != 0;
    };
    s.chat_id = r.read_string_field();
    s.initiator_role = read_bool();
    Bytes key = r.read_field();
    if (key.size() != 32) fail(Errc::decode_error, "secret-chat key must be 32 bytes");
    std::copy(key.begin(), key.end(), s.shared_key.begin());
    s.key_epoch = r.read_u32();
    s.dh_self_public = r.read_field();
    s.messages_under_key = r.read_u32();
    s.send_index = r.read_u32();
    s.recv_index = r.read_u32();
    s.key_epoch_started_at = r.read_u64();
    if (read_bool()) s.policy.every_n_messages = r.read_u32();
    if (read_bool()) s.policy.every_ticks = r.read_u64();
    return s;
}

std::pair<SecretChatSession, SecretChatSession> secret_establish(const Suite& suite, Rng& rng,
                                                                 const std::string& chat_id,
                                                                 const RekeyPolicy& policy,
                                                                 std::uint64_t now) {
    SecretChatSession a;
    a.chat_id = chat_id;
    a.initiator_role = true;
    a.policy = policy;
    SecretChatSession b = a;
    b.initiator_role = false;
    exchange_keys(suite, rng, a, b, now);
    return {std::move(a), std::move(b)};
}

bool secret_needs_rekey(const SecretChatSession& session, std::uint64_t now) {
    if (session.policy.every_n_messages &&
        session.messages_under_key >= *session.policy.every_n_messages) {
        return true;
    }
    if (session.policy.every_ticks &&
        now >= session.key_epoch_started_at + *session.policy.every_ticks) {
        return true;
    }
    return false;
}

void secret_rekey(const Suite& suite, Rng& rng, SecretChatSession& a, SecretChatSession& b,
                  std::uint64_t now) {
    exchange_keys(suite, rng, a, b, now);
    a.key_epoch += 1;
    b.key_epoch += 1;
}

SecretEnvelope secret_encrypt(const Suite& suite, SecretChatSession& session,
                              std::span<const std::uint8_t> plaintext) {
    SecretEnvelope env;
    env.chat_id = session.chat_id;
    env.key_epoch = session.key_epoch;
    env.from_initiator = session.initiator_role;
    env.index = session.send_index;
    Key32 mk = secret_message_key(suite, session, session.initiator_role, session.send_index);
    env.ciphertext = suite.aead_seal(mk, plaintext, secret_ad(env));
    session.send_index += 1;
    session.messages_under_key += 1;
    return env;
}

Bytes secret_decrypt(const Suite& suite, SecretChatSession& session, const SecretEnvelope& envelope) {
    if (envelope.chat_id != session.chat_id || envelope.key_epoch != session.key_epoch) {
        fail(Errc::decryption_failure, "secret-chat epoch mismatch");
    }
    Key32 mk = secret_message_key(suite, session, envelope.from_initiator, envelope.index);
    auto plaintext = suite.aead_open(mk, envelope.ciphertext, secret_ad(envelope));
    if (!plaintext) fail(Errc::decryption_failure, "secret-chat envelope does not authenticate");
    session.recv_index = std::max(session.recv_index, envelope.index + 1);
    session.messages_under_key += 1;
    return *plaintext;
}

}  // namespace tmdelta::ratchet
