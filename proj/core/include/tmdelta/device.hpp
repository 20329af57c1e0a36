#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tmdelta/profile.hpp"
#include "tmdelta/ratchet.hpp"
#include "tmdelta/suite.hpp"

namespace tmdelta::device {

enum class DeviceKind { primary_mobile, desktop_companion };

struct DeviceDescriptor {
    std::string device_id;
    DeviceKind kind = DeviceKind::primary_mobile;
    Bytes hardware_tag;
};

// Everything a device persists falls into one of these classes; the active
// profile maps each class to a placement. `credentials` is the
// primary-reusable account credential; `session_credential` is the slot-level
// token the running app needs, which travels with the session material.
enum class RecordClass {
    identity,
    session,
    secret_session,
    credentials,
    session_credential,
    history,
    contacts,
    metadata,
};

enum class Placement {
    copyable_plain,    // in the copyable store, cleartext
    copyable_vaulted,  // in the copyable store, sealed under the vault key
    device_bound,      // never leaves the device, absent from every export
    not_persisted,     // lives server-side (cloud history), no local record
};

std::string record_class_name(RecordClass c);
Placement placement_for(const linking::AppProfile& profile, RecordClass c);

struct StateStore {
    std::map<std::string, Bytes> copyable;
    std::map<std::string, Bytes> device_bound;
    linking::KeystoreMode keystore_mode = linking::KeystoreMode::plaintext_key_alongside;
};

struct AccountCredentials {
    std::string account_id;
    Bytes device_password;  // empty when the app never stores it on this device
    std::optional<Bytes> auth_key;

    Bytes serialize() const;
    static AccountCredentials deserialize(std::span<const std::uint8_t> data);
    friend bool operator==(const AccountCredentials&, const AccountCredentials&) = default;
};

struct SlotCredential {
    std::string account_id;
    std::uint32_t slot = 0;
    Bytes session_token;

    Bytes serialize() const;
    static SlotCredential deserialize(std::span<const std::uint8_t> data);
    friend bool operator==(const SlotCredential&, const SlotCredential&) = default;
};

struct ContactEntry {
    std::string entity;
    std::string username;
    std::optional<std::string> phone_token;  // absent on pseudonymous networks

    friend bool operator==(const ContactEntry&, const ContactEntry&) = default;
};

// Byte-faithful copy of the copyable store. Canonical form is a sorted
// sequence of length-prefixed path/value pairs, so images compare byte-exact.
struct StateImage {
    std::map<std::string, Bytes> records;

    Bytes serialize() const;
    static StateImage deserialize(std::span<const std::uint8_t> data);
    bool empty() const { return records.empty(); }
};

enum class Direction { incoming, outgoing, outgoing_sync };

struct LogEntry {
    std::string conversation_id;
    std::string author;
    Direction direction = Direction::incoming;
    std::uint64_t tick = 0;
    std::string body;
    std::uint64_t message_id = 0;
    bool secret_chat = false;
};

struct GroupInfo {
    std::string group_id;
    std::vector<std::string> members;
};

struct DeviceState {
    DeviceDescriptor descriptor;
    linking::AppProfile profile;
    StateStore store;

    std::optional<crypto::KeyPair> identity;
    std::optional<AccountCredentials> credentials;
    std::optional<SlotCredential> slot_credential;
    ratchet::PreKeyStore prekeys;
    std::map<std::string, ratchet::SessionState> sessions;         // remote device id -> session
    std::map<std::string, ratchet::SecretChatSession> secret_sessions;  // chat id -> session
    std::vector<ContactEntry> contacts;
    std::vector<GroupInfo> groups;
    std::map<std::string, std::vector<std::string>> conversation_participants;
    std::vector<LogEntry> message_log;
    std::vector<std::string> notifications;  // link alerts surfaced to this device
    linking::LinkRecord self_link;           // companions: own link record copy
    std::vector<linking::LinkRecord> links;  // primaries: list of companion links

    // Passphrase for passphrase_protected keystores; never persisted.
    std::optional<std::string> passphrase;

    std::uint32_t slot() const { return slot_credential ? slot_credential->slot : 0; }
    std::string account_id() const { return credentials ? credentials->account_id : std::string(); }
};

// Which record classes the current holder of the state can actually read.
struct KeyAccess {
    bool vault_open = false;
    std::set<RecordClass> present;
    std::set<RecordClass> readable;

    bool can_read(RecordClass c) const { return readable.contains(c); }
};

DeviceState create_device(const DeviceDescriptor& descriptor, const linking::AppProfile& profile,
                          const crypto::Suite& suite, Rng& rng);

// Flushes live state into store records per the profile's placement map.
void persist(DeviceState& state, const crypto::Suite& suite);

// The clone primitive: no credentials required, that is the point.
StateImage export_copyable(const DeviceState& state, const crypto::Suite& suite);

// Replaces the copyable store with the image; device_bound records and the
// hardware tag stay put. Live fields re-hydrate from whatever is readable.
DeviceState import_image(const DeviceState& target, const StateImage& image,
                         const crypto::Suite& suite);

// Throws keystore_locked when vaulted records exist, cannot be opened from
// this hardware/passphrase, and nothing plain is readable either.
KeyAccess open_keystore(const DeviceState& state, const crypto::Suite& suite);

// Re-populates live fields from the store. Unreadable classes reset to empty.
void hydrate(DeviceState& state, const crypto::Suite& suite);

}  // namespace tmdelta::device
