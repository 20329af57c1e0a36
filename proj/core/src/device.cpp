#include "tmdelta/device.hpp"

#include <algorithm>

namespace tmdelta::device {

using linking::AppProfile;
using linking::EnrollmentArchetype;
using linking::KeystoreMode;

namespace {

constexpr std::string_view kVaultKeyPath = "config.json";

std::string path_for(RecordClass c, Placement placement) {
    std::string name = record_class_name(c);
    switch (placement) {
        case Placement::copyable_plain: return "store/" + name;
        case Placement::copyable_vaulted: return "databases/Databases.db#" + name;
        case Placement::device_bound: return "secure/" + name;
        case Placement::not_persisted: return {};
    }
    return {};
}

std::optional<Key32> vault_key(const DeviceState& state, const crypto::Suite& suite) {
    switch (state.store.keystore_mode) {
        case KeystoreMode::plaintext_key_alongside: {
            auto it = state.store.copyable.find(std::string(kVaultKeyPath));
            if (it == state.store.copyable.end() || it->second.size() != 32) return std::nullopt;
            Key32 key{};
            std::copy(it->second.begin(), it->second.end(), key.begin());
            return key;
        }
        case KeystoreMode::device_bound_key: {
            Bytes buf = to_bytes("tmdelta.vault.devicebound");
            buf.push_back(0x00);
            auto fp = crypto::fingerprint_of(state.descriptor.hardware_tag);
            append(buf, fp.digest);
            return suite.hash(buf);
        }
        case KeystoreMode::passphrase_protected: {
            if (!state.passphrase) return std::nullopt;
            Bytes buf = to_bytes("tmdelta.vault.passphrase");
            buf.push_back(0x00);
            append(buf, *state.passphrase);
            return suite.hash(buf);
        }
    }
    return std::nullopt;
}

bool vault_portable(const AppProfile& profile) {
    return profile.keystore_mode == KeystoreMode::plaintext_key_alongside;
}

Bytes serialize_keypair(const crypto::KeyPair& kp) {
    Bytes out;
    append_field(out, kp.public_key);
    append_field(out, kp.secret_key);
    return out;
}

crypto::KeyPair deserialize_keypair(std::span<const std::uint8_t> data) {
    ByteReader r{data};
    crypto::KeyPair kp;
    kp.public_key = r.read_field();
    kp.secret_key = r.read_field();
    return kp;
}

Bytes serialize_sessions(const DeviceState& state) {
    Bytes out;
    append_u32(out, static_cast<std::uint32_t>(state.sessions.size()));
    for (const auto& [peer, session] : state.sessions) {
        append_field(out, peer);
        append_field(out, session.serialize());
    }
    append_field(out, state.prekeys.serialize());
    return out;
}

void deserialize_sessions(DeviceState& state, std::span<const std::uint8_t> data) {
    ByteReader r{data};
    std::uint32_t n = r.read_u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string peer = r.read_string_field();
        Bytes blob = r.read_field();
        state.sessions.emplace(std::move(peer), ratchet::SessionState::deserialize(blob));
    }
    Bytes pk = r.read_field();
    state.prekeys = ratchet::PreKeyStore::deserialize(pk);
}

Bytes serialize_secret_sessions(const DeviceState& state) {
    Bytes out;
    append_u32(out, static_cast<std::uint32_t>(state.secret_sessions.size()));
    for (const auto& [chat, session] : state.secret_sessions) {
        append_field(out, chat);
        append_field(out, session.serialize());
    }
    return out;
}

void deserialize_secret_sessions(DeviceState& state, std::span<const std::uint8_t> data) {
    ByteReader r{data};
    std::uint32_t n = r.read_u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string chat = r.read_string_field();
        Bytes blob = r.read_field();
        state.secret_sessions.emplace(std::move(chat), ratchet::SecretChatSession::deserialize(blob));
    }
}

void append_log_entry(Bytes& out, const LogEntry& e, bool with_body) {
    append_field(out, e.conversation_id);
    append_field(out, e.author);
    out.push_back(static_cast<std::uint8_t>(e.direction));
    append_u64(out, e.tick);
    append_field(out, with_body ? std::string_view(e.body) : std::string_view());
    append_u64(out, e.message_id);
    out.push_back(e.secret_chat ? 1 : 0);
}

LogEntry read_log_entry(ByteReader& r) {
    LogEntry e;
    e.conversation_id = r.read_string_field();
    e.author = r.read_string_field();
    if (r.pos >= r.data.size()) fail(Errc::decode_error, "log entry truncated");
    e.direction = static_cast<Direction>(r.data[r.pos++]);
    e.tick = r.read_u64();
    e.body = r.read_string_field();
    e.message_id = r.read_u64();
    if (r.pos >= r.data.size()) fail(Errc::decode_error, "log entry truncated");
    e.secret_chat = r.data[r.pos++] != 0;
    return e;
}

Bytes serialize_history(const DeviceState& state, bool secret_part) {
    Bytes out;
    std::vector<const LogEntry*> entries;
    for (const auto& e : state.message_log) {
        if (e.secret_chat == secret_part) entries.push_back(&e);
    }
    append_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto* e : entries) append_log_entry(out, *e, true);
    return out;
}

void deserialize_history(DeviceState& state, std::span<const std::uint8_t> data) {
    ByteReader r{data};
    std::uint32_t n = r.read_u32();
    for (std::uint32_t i = 0; i < n; ++i) state.message_log.push_back(read_log_entry(r));
}

Bytes serialize_contacts(const DeviceState& state) {
    Bytes out;
    append_u32(out, static_cast<std::uint32_t>(state.contacts.size()));
    for (const auto& c : state.contacts) {
        append_field(out, c.entity);
        append_field(out, c.username);
        out.push_back(c.phone_token ? 1 : 0);
        if (c.phone_token) append_field(out, *c.phone_token);
    }
    return out;
}

void deserialize_contacts(DeviceState& state, std::span<const std::uint8_t> data) {
    ByteReader r{data};
    std::uint32_t n = r.read_u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        ContactEntry c;
        c.entity = r.read_string_field();
        c.username = r.read_string_field();
        if (r.pos >= data.size()) fail(Errc::decode_error, "contact truncated");
        bool has_phone = data[r.pos++] != 0;
        if (has_phone) c.phone_token = r.read_string_field();
        state.contacts.push_back(std::move(c));
    }
}

// Groups, conversation membership and body-stripped message summaries: the
// "who talked to whom and when" layer.
Bytes serialize_metadata(const DeviceState& state) {
    Bytes out;
    append_u32(out, static_cast<std::uint32_t>(state.groups.size()));
    for (const auto& g : state.groups) {
        append_field(out, g.group_id);
        append_u32(out, static_cast<std::uint32_t>(g.members.size()));
        for (const auto& m : g.members) append_field(out, m);
    }
    append_u32(out, static_cast<std::uint32_t>(state.conversation_participants.size()));
    for (const auto& [conv, members] : state.conversation_participants) {
        append_field(out, conv);
        append_u32(out, static_cast<std::uint32_t>(members.size()));
        for (const auto& m : members) append_field(out, m);
    }
    std::vector<const LogEntry*> entries;
    for (const auto& e : state.message_log) {
        if (!e.secret_chat) entries.push_back(&e);
    }
    append_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto* e : entries) append_log_entry(out, *e, false);
    return out;
}

void deserialize_metadata(DeviceState& state, std::span<const std::uint8_t> data, bool have_history) {
    ByteReader r{data};
    std::uint32_t n_groups = r.read_u32();
    for (std::uint32_t i = 0; i < n_groups; ++i) {
        GroupInfo g;
        g.group_id = r.read_string_field();
        std::uint32_t n_members = r.read_u32();
        for (std::uint32_t m = 0; m < n_members; ++m) g.members.push_back(r.read_string_field());
        state.groups.push_back(std::move(g));
    }
    std::uint32_t n_convs = r.read_u32();
    for (std::uint32_t i = 0; i < n_convs; ++i) {
        std::string conv = r.read_string_field();
        std::uint32_t n_members = r.read_u32();
        std::vector<std::string> members;
        for (std::uint32_t m = 0; m < n_members; ++m) members.push_back(r.read_string_field());
        state.conversation_participants.emplace(std::move(conv), std::move(members));
    }
    std::uint32_t n_entries = r.read_u32();
    for (std::uint32_t i = 0; i < n_entries; ++i) {
        LogEntry e = read_log_entry(r);
        if (!have_history) state.message_log.push_back(std::move(e));
    }
}

struct RecordPayloads {
    std::map<RecordClass, Bytes> payloads;
};

RecordPayloads collect_payloads(const DeviceState& state) {
    RecordPayloads out;
    if (state.identity) out.payloads[RecordClass::identity] = serialize_keypair(*state.identity);
    if (!state.sessions.empty() || state.prekeys.signed_prekey_id != 0) {
        out.payloads[RecordClass::session] = serialize_sessions(state);
    }
    if (!state.secret_sessions.empty()) {
        out.payloads[RecordClass::secret_session] = serialize_secret_sessions(state);
    }
    if (state.credentials) out.payloads[RecordClass::credentials] = state.credentials->serialize();
    if (state.slot_credential) {
        out.payloads[RecordClass::session_credential] = state.slot_credential->serialize();
    }
    bool any_plain = std::any_of(state.message_log.begin(), state.message_log.end(),
                                 [](const LogEntry& e) { return !e.secret_chat; });
    if (any_plain) out.payloads[RecordClass::history] = serialize_history(state, false);
    if (!state.contacts.empty()) out.payloads[RecordClass::contacts] = serialize_contacts(state);
    if (!state.groups.empty() || !state.conversation_participants.empty() ||
        !state.message_log.empty()) {
        out.payloads[RecordClass::metadata] = serialize_metadata(state);
    }
    return out;
}

}  // namespace

std::string record_class_name(RecordClass c) {
    switch (c) {
        case RecordClass::identity: return "identity";
        case RecordClass::session: return "sessions";
        case RecordClass::secret_session: return "secret_sessions";
        case RecordClass::credentials: return "credentials";
        case RecordClass::session_credential: return "session_credential";
        case RecordClass::history: return "messages";
        case RecordClass::contacts: return "contacts";
        case RecordClass::metadata: return "metadata";
    }
    return "unknown";
}

Placement placement_for(const AppProfile& profile, RecordClass c) {
    const bool portable = vault_portable(profile);
    const bool independent = profile.archetype == EnrollmentArchetype::independent_companion_key;
    switch (c) {
        case RecordClass::identity:
            if (independent) return portable ? Placement::copyable_vaulted : Placement::copyable_plain;
            return Placement::device_bound;
        case RecordClass::session:
        case RecordClass::session_credential:
            if (independent) return portable ? Placement::copyable_vaulted : Placement::copyable_plain;
            return profile.metadata_copyable ? Placement::device_bound : Placement::copyable_vaulted;
        case RecordClass::secret_session:
            return profile.secret_chats ? Placement::device_bound : Placement::not_persisted;
        case RecordClass::credentials:
            return profile.cloud_history ? Placement::copyable_plain : Placement::copyable_vaulted;
        case RecordClass::history:
            if (!profile.history_copyable) {
                return profile.metadata_copyable ? Placement::device_bound
                                                 : Placement::copyable_vaulted;
            }
            if (profile.cloud_history) return Placement::not_persisted;
            return portable ? Placement::copyable_vaulted : Placement::copyable_plain;
        case RecordClass::contacts:
        case RecordClass::metadata:
            if (!profile.metadata_copyable) return Placement::copyable_vaulted;
            return portable ? Placement::copyable_vaulted : Placement::copyable_plain;
    }
    return Placement::not_persisted;
}

Bytes AccountCredentials::serialize() const {
    Bytes out;
    append_field(out, account_id);
    append_field(out, device_password);
    out.push_back(auth_key ? 1 : 0);
    if (auth_key) append_field(out, *auth_key);
    return out;
}

AccountCredentials AccountCredentials::deserialize(std::span<const std::uint8_t> data) {
    ByteReader r{data};
    AccountCredentials c;
    c.account_id = r.read_string_field();
    c.device_password = r.read_field();
    if (r.pos >= data.size()) fail(Errc::decode_error, "credentials truncated");
    bool has_auth = data[r.pos++] != 0;
    if (has_auth) c.auth_key = r.read_field();
    return c;
}

Bytes SlotCredential::serialize() const {
    Bytes out;
    append_field(out, account_id);
    append_u32(out, slot);
    append_field(out, session_token);
    return out;
}

SlotCredential SlotCredential::deserialize(std::span<const std::uint8_t> data) {
    ByteReader r{data};
    SlotCredential c;
    c.account_id = r.read_string_field();
    c.slot = r.read_u32();
    c.session_token = r.read_field();
    return c;
}

Bytes StateImage::serialize() const {
    Bytes out;
    append_u32(out, static_cast<std::uint32_t>(records.size()));
    for (const auto& [path, value] : records) {
        append_field(out, path);
        append_field(out, value);
    }
    return out;
}

StateImage StateImage::deserialize(std::span<const std::uint8_t> data) {
    ByteReader r{data};
    StateImage image;
    std::uint32_t n = r.read_u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string path = r.read_string_field();
        Bytes value = r.read_field();
        image.records.emplace(std::move(path), std::move(value));
    }
    return image;
}

DeviceState create_device(const DeviceDescriptor& descriptor, const AppProfile& profile,
                          const crypto::Suite& suite, Rng& rng) {
    DeviceState state;
    state.descriptor = descriptor;
    state.profile = profile;
    state.store.keystore_mode = profile.keystore_mode;
    if (profile.keystore_mode == KeystoreMode::plaintext_key_alongside) {
        Key32 key = rng.key32();
        state.store.copyable[std::string(kVaultKeyPath)] = Bytes(key.begin(), key.end());
    }
    (void)suite;
    return state;
}

void persist(DeviceState& state, const crypto::Suite& suite) {
    // rewrite records from scratch so removals propagate
    Bytes vault_key_record;
    if (auto it = state.store.copyable.find(std::string(kVaultKeyPath));
        it != state.store.copyable.end()) {
        vault_key_record = it->second;
    }
    state.store.copyable.clear();
    state.store.device_bound.clear();
    if (!vault_key_record.empty()) {
        state.store.copyable[std::string(kVaultKeyPath)] = vault_key_record;
    }

    auto key = vault_key(state, suite);
    RecordPayloads collected = collect_payloads(state);
    for (auto& [cls, payload] : collected.payloads) {
        if (payload.empty()) continue;
        Placement placement = placement_for(state.profile, cls);
        std::string path = path_for(cls, placement);
        switch (placement) {
            case Placement::not_persisted: break;
            case Placement::copyable_plain: state.store.copyable[path] = payload; break;
            case Placement::device_bound: state.store.device_bound[path] = payload; break;
            case Placement::copyable_vaulted: {
                if (!key) break;  // no key material: record cannot be written
                Bytes ad = to_bytes(path);
                state.store.copyable[path] = suite.aead_seal(*key, payload, ad);
                break;
            }
        }
    }

    // secret part of the log always lands device-bound
    bool any_secret = std::any_of(state.message_log.begin(), state.message_log.end(),
                                  [](const LogEntry& e) { return e.secret_chat; });
    if (any_secret) {
        state.store.device_bound["secure/messages_secret"] = serialize_history(state, true);
    }
}

StateImage export_copyable(const DeviceState& state, const crypto::Suite& suite) {
    DeviceState snapshot = state;
    persist(snapshot, suite);
    StateImage image;
    image.records = snapshot.store.copyable;
    return image;
}

KeyAccess open_keystore(const DeviceState& state, const crypto::Suite& suite) {
    KeyAccess access;
    auto key = vault_key(state, suite);

    bool any_vaulted = false;
    bool any_vaulted_open = false;
    for (RecordClass cls : {RecordClass::identity, RecordClass::session, RecordClass::secret_session,
                            RecordClass::credentials, RecordClass::session_credential,
                            RecordClass::history, RecordClass::contacts, RecordClass::metadata}) {
        Placement placement = placement_for(state.profile, cls);
        std::string path = path_for(cls, placement);
        bool in_copyable = !path.empty() && state.store.copyable.contains(path);
        bool in_bound = !path.empty() && state.store.device_bound.contains(path);
        if (!in_copyable && !in_bound) continue;
        access.present.insert(cls);
        switch (placement) {
            case Placement::copyable_plain:
                access.readable.insert(cls);
                break;
            case Placement::device_bound:
                if (in_bound) access.readable.insert(cls);
                break;
            case Placement::copyable_vaulted: {
                any_vaulted = true;
                if (!key) break;
                Bytes ad = to_bytes(path);
                if (suite.aead_open(*key, state.store.copyable.at(path), ad)) {
                    access.readable.insert(cls);
                    any_vaulted_open = true;
                }
                break;
            }
            case Placement::not_persisted:
                break;
        }
    }
    access.vault_open = !any_vaulted || any_vaulted_open;
    if (any_vaulted && !any_vaulted_open && access.readable.empty()) {
        fail(Errc::keystore_locked,
             state.store.keystore_mode == KeystoreMode::passphrase_protected
                 ? "passphrase required"
                 : "vault key does not match this device");
    }
    return access;
}

void hydrate(DeviceState& state, const crypto::Suite& suite) {
    state.identity.reset();
    state.credentials.reset();
    state.slot_credential.reset();
    state.prekeys = {};
    state.sessions.clear();
    state.secret_sessions.clear();
    state.contacts.clear();
    state.groups.clear();
    state.conversation_participants.clear();
    state.message_log.clear();

    KeyAccess access;
    try {
        access = open_keystore(state, suite);
    } catch (const SimError&) {
        return;  // locked out entirely; live state stays empty
    }
    auto key = vault_key(state, suite);

    auto payload_of = [&](RecordClass cls) -> std::optional<Bytes> {
        if (!access.can_read(cls)) return std::nullopt;
        Placement placement = placement_for(state.profile, cls);
        std::string path = path_for(cls, placement);
        if (placement == Placement::device_bound) {
            auto it = state.store.device_bound.find(path);
            if (it == state.store.device_bound.end()) return std::nullopt;
            return it->second;
        }
        auto it = state.store.copyable.find(path);
        if (it == state.store.copyable.end()) return std::nullopt;
        if (placement == Placement::copyable_plain) return it->second;
        if (!key) return std::nullopt;
        return suite.aead_open(*key, it->second, to_bytes(path));
    };

    if (auto p = payload_of(RecordClass::identity)) state.identity = deserialize_keypair(*p);
    if (auto p = payload_of(RecordClass::session)) deserialize_sessions(state, *p);
    if (auto p = payload_of(RecordClass::secret_session)) deserialize_secret_sessions(state, *p);
    if (auto p = payload_of(RecordClass::credentials)) {
        state.credentials = AccountCredentials::deserialize(*p);
    }
    if (auto p = payload_of(RecordClass::session_credential)) {
        state.slot_credential = SlotCredential::deserialize(*p);
    }
    bool have_history = false;
    if (auto p = payload_of(RecordClass::history)) {
        deserialize_history(state, *p);
        have_history = true;
    }
    if (auto p = payload_of(RecordClass::contacts)) deserialize_contacts(state, *p);
    if (auto p = payload_of(RecordClass::metadata)) deserialize_metadata(state, *p, have_history);

    // the device's own secret-chat log
    if (auto it = state.store.device_bound.find("secure/messages_secret");
        it != state.store.device_bound.end()) {
        deserialize_history(state, it->second);
    }

    std::stable_sort(state.message_log.begin(), state.message_log.end(),
                     [](const LogEntry& a, const LogEntry& b) {
                         return std::make_pair(a.tick, a.message_id) <
                                std::make_pair(b.tick, b.message_id);
                     });
}

DeviceState import_image(const DeviceState& target, const StateImage& image,
                         const crypto::Suite& suite) {
    DeviceState next = target;
    next.store.copyable = image.records;
    hydrate(next, suite);
    return next;
}

}  // namespace tmdelta::device
