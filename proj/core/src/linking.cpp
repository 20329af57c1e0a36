#include "tmdelta/linking.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>

namespace tmdelta::linking {

using nlohmann::json;

std::string archetype_name(EnrollmentArchetype a) {
    switch (a) {
        case EnrollmentArchetype::independent_companion_key: return "independent_companion_key";
        case EnrollmentArchetype::identity_key_transfer: return "identity_key_transfer";
        case EnrollmentArchetype::device_pinned_key: return "device_pinned_key";
    }
    return "unknown";
}

EnrollmentArchetype archetype_from_name(std::string_view name) {
    if (name == "independent_companion_key") return EnrollmentArchetype::independent_companion_key;
    if (name == "identity_key_transfer") return EnrollmentArchetype::identity_key_transfer;
    if (name == "device_pinned_key") return EnrollmentArchetype::device_pinned_key;
    fail(Errc::config_invalid, "unknown archetype '" + std::string(name) + "'");
}

std::string keystore_mode_name(KeystoreMode m) {
    switch (m) {
        case KeystoreMode::plaintext_key_alongside: return "plaintext_key_alongside";
        case KeystoreMode::passphrase_protected: return "passphrase_protected";
        case KeystoreMode::device_bound_key: return "device_bound_key";
    }
    return "unknown";
}

KeystoreMode keystore_mode_from_name(std::string_view name) {
    if (name == "plaintext_key_alongside") return KeystoreMode::plaintext_key_alongside;
    if (name == "passphrase_protected") return KeystoreMode::passphrase_protected;
    if (name == "device_bound_key") return KeystoreMode::device_bound_key;
    fail(Errc::config_invalid, "unknown keystore mode '" + std::string(name) + "'");
}

std::string launch_status_name(LaunchStatus s) {
    switch (s) {
        case LaunchStatus::online: return "online";
        case LaunchStatus::offline_only: return "offline_only";
        case LaunchStatus::clone_exit: return "clone_exit";
        case LaunchStatus::auth_failure: return "auth_failure";
    }
    return "unknown";
}

void validate_profile(const AppProfile& profile) {
    if (profile.name.empty()) fail(Errc::config_invalid, "profile name must not be empty");
    if (profile.archetype != EnrollmentArchetype::independent_companion_key &&
        profile.companion_independent_relaunch) {
        fail(Errc::config_invalid,
             "profile '" + profile.name +
                 "': companion_independent_relaunch requires independent_companion_key");
    }
    if ((profile.rekey_every_n_messages || profile.rekey_every_ticks) && !profile.secret_chats) {
        fail(Errc::config_invalid,
             "profile '" + profile.name + "': rekey budgets apply to secret chats only");
    }
    if (profile.history_copyable && !profile.metadata_copyable) {
        fail(Errc::config_invalid,
             "profile '" + profile.name + "': copyable history implies copyable metadata");
    }
    if (profile.secret_chats && !profile.cloud_history) {
        fail(Errc::config_invalid,
             "profile '" + profile.name + "': secret chats are modeled only for cloud messengers");
    }
}

const std::vector<AppProfile>& builtin_profiles() {
    static const std::vector<AppProfile> profiles = [] {
        std::vector<AppProfile> out;

        AppProfile signal;
        signal.name = "signal";
        signal.archetype = EnrollmentArchetype::independent_companion_key;
        signal.keystore_mode = KeystoreMode::plaintext_key_alongside;
        signal.companion_independent_relaunch = true;
        signal.link_alerts = false;
        signal.metadata_copyable = true;
        signal.history_copyable = true;
        out.push_back(signal);

        AppProfile whatsapp;
        whatsapp.name = "whatsapp";
        whatsapp.archetype = EnrollmentArchetype::independent_companion_key;
        whatsapp.keystore_mode = KeystoreMode::device_bound_key;
        whatsapp.companion_independent_relaunch = true;
        whatsapp.session_expiry = 2000;
        whatsapp.link_alerts = true;
        whatsapp.metadata_copyable = true;
        whatsapp.history_copyable = true;
        out.push_back(whatsapp);

        AppProfile element;
        element.name = "element";
        element.archetype = EnrollmentArchetype::device_pinned_key;
        element.keystore_mode = KeystoreMode::device_bound_key;
        element.companion_independent_relaunch = false;
        element.metadata_copyable = true;
        element.history_copyable = false;
        out.push_back(element);

        AppProfile wickrme;
        wickrme.name = "wickrme";
        wickrme.archetype = EnrollmentArchetype::device_pinned_key;
        wickrme.keystore_mode = KeystoreMode::device_bound_key;
        wickrme.companion_independent_relaunch = false;
        wickrme.metadata_copyable = false;
        wickrme.history_copyable = false;
        out.push_back(wickrme);

        AppProfile viber;
        viber.name = "viber";
        viber.archetype = EnrollmentArchetype::identity_key_transfer;
        viber.keystore_mode = KeystoreMode::device_bound_key;
        viber.companion_independent_relaunch = false;
        viber.metadata_copyable = false;
        viber.history_copyable = false;
        out.push_back(viber);

        AppProfile telegram;
        telegram.name = "telegram";
        telegram.archetype = EnrollmentArchetype::independent_companion_key;
        telegram.keystore_mode = KeystoreMode::device_bound_key;
        telegram.companion_independent_relaunch = true;
        telegram.cloud_history = true;
        telegram.secret_chats = true;
        telegram.rekey_every_n_messages = 100;
        telegram.rekey_every_ticks = 10000;
        telegram.metadata_copyable = true;
        telegram.history_copyable = true;
        telegram.mfa_logout_option = true;
        out.push_back(telegram);

        for (const auto& p : out) validate_profile(p);
        return out;
    }();
    return profiles;
}

bool is_builtin_profile(std::string_view name) {
    const auto& all = builtin_profiles();
    return std::any_of(all.begin(), all.end(), [&](const AppProfile& p) { return p.name == name; });
}

const AppProfile& profile_by_name(std::string_view name) {
    for (const auto& p : builtin_profiles()) {
        if (p.name == name) return p;
    }
    fail(Errc::unknown_profile, std::string(name));
}

namespace {

json profile_to_json(const AppProfile& p) {
    json j;
    j["name"] = p.name;
    j["archetype"] = archetype_name(p.archetype);
    j["keystore_mode"] = keystore_mode_name(p.keystore_mode);
    j["companion_independent_relaunch"] = p.companion_independent_relaunch;
    if (p.session_expiry) j["session_expiry"] = *p.session_expiry;
    j["link_alerts"] = p.link_alerts;
    if (p.rekey_every_n_messages) j["rekey_every_n_messages"] = *p.rekey_every_n_messages;
    if (p.rekey_every_ticks) j["rekey_every_ticks"] = *p.rekey_every_ticks;
    j["cloud_history"] = p.cloud_history;
    j["secret_chats"] = p.secret_chats;
    j["metadata_copyable"] = p.metadata_copyable;
    j["history_copyable"] = p.history_copyable;
    j["mfa_logout_option"] = p.mfa_logout_option;
    return j;
}

}  // namespace

std::string dump_profile(const AppProfile& profile) {
    return profile_to_json(profile).dump(2) + "\n";
}

AppProfile profile_from_json_obj(const json& j) {
    static const std::set<std::string> known = {
        "name",          "archetype",          "keystore_mode", "companion_independent_relaunch",
        "session_expiry", "link_alerts",        "rekey_every_n_messages", "rekey_every_ticks",
        "cloud_history", "secret_chats",       "metadata_copyable", "history_copyable",
        "mfa_logout_option"};
    if (!j.is_object()) fail(Errc::config_invalid, "profile must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) fail(Errc::config_invalid, "profile: unknown field '" + key + "'");
    }
    AppProfile p;
    p.name = j.at("name").get<std::string>();
    p.archetype = archetype_from_name(j.at("archetype").get<std::string>());
    p.keystore_mode = keystore_mode_from_name(j.at("keystore_mode").get<std::string>());
    p.companion_independent_relaunch = j.value("companion_independent_relaunch", false);
    if (j.contains("session_expiry")) p.session_expiry = j.at("session_expiry").get<std::uint64_t>();
    p.link_alerts = j.value("link_alerts", false);
    if (j.contains("rekey_every_n_messages")) {
        p.rekey_every_n_messages = j.at("rekey_every_n_messages").get<std::uint32_t>();
    }
    if (j.contains("rekey_every_ticks")) {
        p.rekey_every_ticks = j.at("rekey_every_ticks").get<std::uint64_t>();
    }
    p.cloud_history = j.value("cloud_history", false);
    p.secret_chats = j.value("secret_chats", false);
    p.metadata_copyable = j.value("metadata_copyable", false);
    p.history_copyable = j.value("history_copyable", false);
    p.mfa_logout_option = j.value("mfa_logout_option", false);
    validate_profile(p);
    return p;
}

AppProfile parse_profile(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(Errc::config_invalid, std::string("profile JSON: ") + e.what());
    }
    return profile_from_json_obj(j);
}

Bytes enrollment_token_message(const std::string& account_id,
                               const std::string& companion_device_id, std::uint64_t now) {
    Bytes msg;
    append(msg, "tmdelta.enroll");
    msg.push_back(0x00);
    append_field(msg, account_id);
    append_field(msg, companion_device_id);
    append_u64(msg, now);
    return msg;
}

LinkRecord enroll_companion(device::DeviceState& primary, device::DeviceState& companion,
                            server::ServerState& server, const AppProfile& profile,
                            const crypto::Suite& suite, Rng& rng, std::uint64_t now) {
    if (!primary.identity || !primary.credentials) {
        fail(Errc::unauthorized, "primary device not registered");
    }
    const std::string account_id = primary.credentials->account_id;
    if (auto* existing = server.find_link(account_id, companion.descriptor.device_id);
        existing && existing->active) {
        fail(Errc::already_linked, companion.descriptor.device_id);
    }
    if (companion.slot_credential && companion.self_link.active) {
        fail(Errc::already_linked, companion.descriptor.device_id);
    }

    // QR channel: one primary-signed enrollment token, verified server-side.
    Bytes token_msg = enrollment_token_message(account_id, companion.descriptor.device_id, now);
    Bytes authorization = suite.sign(primary.identity->secret_key, token_msg);
    const auto& acct = server.account(account_id);
    if (!suite.verify(authorization, acct.identity_public, token_msg)) {
        fail(Errc::unauthorized, "enrollment token signature rejected");
    }

    switch (profile.archetype) {
        case EnrollmentArchetype::independent_companion_key:
        case EnrollmentArchetype::device_pinned_key:
            companion.identity = suite.keygen(rng);
            break;
        case EnrollmentArchetype::identity_key_transfer:
            // the primary's identity key pair travels to the companion and
            // lands device-bound
            companion.identity = *primary.identity;
            break;
    }

    LinkRecord record;
    record.companion_device_id = companion.descriptor.device_id;
    record.companion_identity_public = companion.identity->public_key;
    if (profile.session_expiry) record.expires_at = now + *profile.session_expiry;
    if (profile.archetype == EnrollmentArchetype::device_pinned_key) {
        auto fp = crypto::fingerprint_of(companion.descriptor.hardware_tag);
        record.bound_fingerprint = Bytes(fp.digest.begin(), fp.digest.end());
    }
    record.session_token = rng.bytes(32);
    if (profile.cloud_history) record.auth_key = rng.bytes(256);  // permanent slot key

    LinkRecord& stored = server.add_link(account_id, record, now);

    companion.credentials = device::AccountCredentials{};
    companion.credentials->account_id = account_id;
    if (profile.cloud_history) {
        // the desktop never stores the primary password, only the permanent key
        companion.credentials->auth_key = stored.auth_key;
    } else {
        companion.credentials->device_password = primary.credentials->device_password;
    }
    companion.slot_credential =
        device::SlotCredential{account_id, stored.slot, stored.session_token};

    // fresh pre-key material under the companion identity
    companion.prekeys = {};
    companion.prekeys.signed_prekey_id = 1;
    companion.prekeys.signed_prekey = suite.keygen(rng);
    server::PublishedBundle bundle;
    bundle.base.identity_public = companion.identity->public_key;
    bundle.base.signed_prekey_id = companion.prekeys.signed_prekey_id;
    bundle.base.signed_prekey_public = companion.prekeys.signed_prekey.public_key;
    bundle.base.signed_prekey_signature =
        suite.sign(companion.identity->secret_key, companion.prekeys.signed_prekey.public_key);
    for (std::uint32_t i = 1; i <= 8; ++i) {
        crypto::KeyPair otp = suite.keygen(rng);
        companion.prekeys.one_time.emplace(i, otp);
        bundle.one_time_pool.emplace(i, otp.public_key);
    }
    server.publish_bundle(account_id, stored.slot, std::move(bundle), suite);

    primary.links.push_back(stored);
    companion.self_link = stored;
    companion.contacts = primary.contacts;  // companions mirror the account's contact book
    companion.groups = primary.groups;

    if (profile.link_alerts) {
        server::Notification note{now, "link_added", companion.descriptor.device_id};
        server.push_notification(account_id, note);
        primary.notifications.push_back("companion linked: " + companion.descriptor.device_id);
    }

    device::persist(companion, suite);
    return stored;
}

LaunchResult launch_companion(device::DeviceState& companion, server::ServerState& server,
                              const crypto::Suite& suite, std::uint64_t now) {
    const AppProfile& profile = companion.profile;

    // identity-transfer apps refuse to run without the installed key pair
    if (profile.archetype == EnrollmentArchetype::identity_key_transfer && !companion.identity) {
        return {LaunchStatus::clone_exit, std::nullopt, "identity key pair not installed"};
    }

    device::KeyAccess access;
    try {
        access = device::open_keystore(companion, suite);
    } catch (const SimError& e) {
        return {LaunchStatus::auth_failure, std::nullopt, e.what()};
    }

    if (!companion.identity || !companion.slot_credential) {
        bool metadata_readable = access.can_read(device::RecordClass::metadata) ||
                                 access.can_read(device::RecordClass::contacts);
        if (metadata_readable) {
            return {LaunchStatus::offline_only, std::nullopt,
                    "no usable identity; metadata readable offline"};
        }
        return {LaunchStatus::auth_failure, std::nullopt, "no usable identity or session credential"};
    }

    server::AuthRequest req;
    req.account_id = companion.slot_credential->account_id;
    req.slot = companion.slot_credential->slot;
    req.session_token = companion.slot_credential->session_token;
    if (companion.credentials && companion.credentials->auth_key) {
        req.auth_key = companion.credentials->auth_key;
    }
    req.device_id = companion.descriptor.device_id;
    req.identity_public = companion.identity->public_key;
    req.fingerprint = crypto::fingerprint_of(companion.descriptor.hardware_tag);

    try {
        std::uint64_t token = server.authenticate(req, now);
        return {LaunchStatus::online, token, ""};
    } catch (const SimError& e) {
        return {LaunchStatus::auth_failure, std::nullopt, e.what()};
    }
}

void delink(device::DeviceState& primary, server::ServerState& server,
            const std::string& companion_device_id, std::uint64_t now) {
    auto it = std::find_if(primary.links.begin(), primary.links.end(), [&](const LinkRecord& l) {
        return l.companion_device_id == companion_device_id && l.active;
    });
    if (it == primary.links.end()) fail(Errc::unknown_companion, companion_device_id);

    const std::string account_id = primary.credentials->account_id;
    server.deactivate_link(account_id, it->slot);
    it->active = false;

    if (primary.profile.link_alerts) {
        server::Notification note{now, "link_removed", companion_device_id};
        server.push_notification(account_id, note);
        primary.notifications.push_back("companion de-linked: " + companion_device_id);
    }
}

std::vector<LinkRecord> expire_links(server::ServerState& server, std::uint64_t now) {
    return server.expire_links(now);
}

}  // namespace tmdelta::linking
