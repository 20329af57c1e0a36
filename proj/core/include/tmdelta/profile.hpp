#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tmdelta/bytes.hpp"

namespace tmdelta::linking {

// How a companion device obtains its identity at enrollment. The archetype
// fixes where the identity secret lives afterwards, which in turn decides
// what a state copy is worth to an attacker.
enum class EnrollmentArchetype {
    independent_companion_key,  // companion generates its own identity
    identity_key_transfer,      // primary's identity secret installed device-bound
    device_pinned_key,          // companion identity bound to its hardware fingerprint
};

enum class KeystoreMode {
    plaintext_key_alongside,  // vault key sits in a copyable config record
    passphrase_protected,     // vault key derived from a passphrase, never stored
    device_bound_key,         // vault key derived from the hardware fingerprint
};

std::string archetype_name(EnrollmentArchetype a);
EnrollmentArchetype archetype_from_name(std::string_view name);
std::string keystore_mode_name(KeystoreMode m);
KeystoreMode keystore_mode_from_name(std::string_view name);

struct AppProfile {
    std::string name;
    EnrollmentArchetype archetype = EnrollmentArchetype::independent_companion_key;
    KeystoreMode keystore_mode = KeystoreMode::plaintext_key_alongside;
    bool companion_independent_relaunch = true;
    std::optional<std::uint64_t> session_expiry;  // ticks
    bool link_alerts = false;
    std::optional<std::uint32_t> rekey_every_n_messages;
    std::optional<std::uint64_t> rekey_every_ticks;
    bool cloud_history = false;
    bool secret_chats = false;
    bool metadata_copyable = false;
    bool history_copyable = false;
    bool mfa_logout_option = false;

    friend bool operator==(const AppProfile&, const AppProfile&) = default;
};

// Throws config_invalid when flags contradict each other (for example an
// identity-transfer profile claiming independent relaunch).
void validate_profile(const AppProfile& profile);

const std::vector<AppProfile>& builtin_profiles();
const AppProfile& profile_by_name(std::string_view name);  // throws unknown_profile
bool is_builtin_profile(std::string_view name);

// Canonical JSON form: dump/parse round-trips exactly. Unknown fields reject.
std::string dump_profile(const AppProfile& profile);
AppProfile parse_profile(const std::string& json_text);

struct LinkRecord {
    std::string companion_device_id;
    Bytes companion_identity_public;
    std::uint32_t slot = 0;
    std::uint64_t linked_at = 0;
    std::optional<std::uint64_t> expires_at;
    bool active = false;
    // Binding fingerprint digest for device_pinned_key profiles; empty otherwise.
    Bytes bound_fingerprint;
    // Slot-scoped permanent auth key (cloud-messenger style); a shared
    // credential, not an end-to-end secret.
    std::optional<Bytes> auth_key;
    // Slot session token the running companion presents on reconnect.
    Bytes session_token;

    friend bool operator==(const LinkRecord&, const LinkRecord&) = default;
};

}  // namespace tmdelta::linking
