#include "tmdelta/server.hpp"

#include <algorithm>

namespace tmdelta::server {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void verify_bundle(const PublishedBundle& bundle, const Bytes& identity_public,
                   const crypto::Suite& suite) {
    if (bundle.base.identity_public != identity_public ||
        !suite.verify(bundle.base.signed_prekey_signature, identity_public,
                      bundle.base.signed_prekey_public)) {
        fail(Errc::bad_signature, "pre-key bundle signature rejected");
    }
}

}  // namespace

void ServerState::register_account(const std::string& account_id, const Bytes& identity_public,
                                   const Bytes& account_password,
                                   const Bytes& primary_session_token,
                                   const std::string& primary_device_id, PublishedBundle bundle,
                                   const crypto::Suite& suite, bool cloud_enabled,
                                   std::optional<std::uint64_t> default_link_expiry) {
    if (accounts_.contains(account_id)) fail(Errc::duplicate_account, account_id);
    verify_bundle(bundle, identity_public, suite);
    AccountRecord record;
    record.account_id = account_id;
    record.identity_public = identity_public;
    record.account_password = account_password;
    record.primary_session_token = primary_session_token;
    record.primary_device_id = primary_device_id;
    record.cloud_enabled = cloud_enabled;
    record.default_link_expiry = default_link_expiry;
    record.bundles.emplace(0u, std::move(bundle));
    accounts_.emplace(account_id, std::move(record));
}

bool ServerState::has_account(const std::string& account_id) const {
    return accounts_.contains(account_id);
}

AccountRecord& ServerState::account(const std::string& account_id) {
    auto it = accounts_.find(account_id);
    if (it == accounts_.end()) fail(Errc::unknown_account, account_id);
    return it->second;
}

const AccountRecord& ServerState::account(const std::string& account_id) const {
    auto it = accounts_.find(account_id);
    if (it == accounts_.end()) fail(Errc::unknown_account, account_id);
    return it->second;
}

void ServerState::publish_bundle(const std::string& account_id, std::uint32_t slot,
                                 PublishedBundle bundle, const crypto::Suite& suite) {
    auto& record = account(account_id);
    if (!suite.verify(bundle.base.signed_prekey_signature, bundle.base.identity_public,
                      bundle.base.signed_prekey_public)) {
        fail(Errc::bad_signature, "pre-key bundle signature rejected");
    }
    record.bundles[slot] = std::move(bundle);
}

ratchet::PreKeyBundle ServerState::take_bundle(const std::string& account_id, std::uint32_t slot) {
    auto& record = account(account_id);
    auto it = record.bundles.find(slot);
    if (it == record.bundles.end()) fail(Errc::unknown_account, "no bundle for slot");
    ratchet::PreKeyBundle bundle = it->second.base;
    auto& pool = it->second.one_time_pool;
    if (!pool.empty()) {
        auto first = pool.begin();
        bundle.one_time_prekey_id = first->first;
        bundle.one_time_prekey_public = first->second;
        pool.erase(first);
    } else {
        bundle.one_time_prekey_id.reset();
        bundle.one_time_prekey_public.reset();
    }
    return bundle;
}

std::uint64_t ServerState::authenticate(const AuthRequest& request, std::uint64_t now) {
    auto it = accounts_.find(request.account_id);
    if (it == accounts_.end()) fail(Errc::bad_credentials, "unknown account");
    AccountRecord& record = it->second;

    auto issue = [&](std::uint32_t slot) {
        Connection conn;
        conn.token = next_token_++;
        conn.account_id = request.account_id;
        conn.slot = slot;
        conn.device_id = request.device_id;
        conn.session_refresh_tick = now;
        connections_.emplace(conn.token, conn);
        return conn.token;
    };

    bool saw_inactive_match = false;

    // Slot session credential.
    if (!request.session_token.empty() && request.slot) {
        if (*request.slot == 0) {
            if (request.session_token == record.primary_session_token) return issue(0);
        } else {
            for (auto& link : record.device_list) {
                if (link.slot != *request.slot) continue;
                bool token_ok = !link.session_token.empty() &&
                                link.session_token == request.session_token;
                if (!token_ok) break;
                if (!link.active) {
                    saw_inactive_match = true;
                    break;
                }
                if (!link.bound_fingerprint.empty() &&
                    !std::equal(link.bound_fingerprint.begin(), link.bound_fingerprint.end(),
                                request.fingerprint.digest.begin(),
                                request.fingerprint.digest.end())) {
                    fail(Errc::bad_credentials, "device fingerprint does not match binding");
                }
                return issue(link.slot);
            }
        }
    }

    // Cloud-style permanent auth key, slot-scoped.
    if (request.auth_key) {
        for (auto& link : record.device_list) {
            if (!link.auth_key || *link.auth_key != *request.auth_key) continue;
            if (!link.active) {
                saw_inactive_match = true;
                break;
            }
            return issue(link.slot);
        }
    }

    // Account-password re-attach: new companion slot for the presenting device.
    if (!request.password.empty() && request.password == record.account_password) {
        linking::LinkRecord reattached;
        reattached.companion_device_id = request.device_id;
        reattached.companion_identity_public = request.identity_public;
        reattached.slot = record.next_slot++;
        reattached.linked_at = now;
        if (record.default_link_expiry) reattached.expires_at = now + *record.default_link_expiry;
        reattached.active = true;
        record.device_list.push_back(reattached);
        return issue(reattached.slot);
    }

    if (saw_inactive_match) fail(Errc::revoked, "device link inactive");
    fail(Errc::bad_credentials, "no credential matched");
}

void ServerState::refresh_connection(std::uint64_t token, std::uint64_t now) {
    connection(token).session_refresh_tick = now;
}

void ServerState::disconnect(std::uint64_t token) {
    auto it = connections_.find(token);
    if (it != connections_.end()) it->second.revoked = true;
}

bool ServerState::token_live(std::uint64_t token) const {
    auto it = connections_.find(token);
    return it != connections_.end() && !it->second.revoked;
}

Connection& ServerState::connection(std::uint64_t token) {
    auto it = connections_.find(token);
    if (it == connections_.end() || it->second.revoked) {
        fail(Errc::revoked_connection, "token " + std::to_string(token));
    }
    return it->second;
}

void ServerState::route(std::uint64_t from_token, const std::string& to_account,
                        std::uint32_t slot, MailboxItem item) {
    connection(from_token);  // sender must be live
    if (!accounts_.contains(to_account)) fail(Errc::unknown_account, to_account);
    mailboxes_[{to_account, slot}].push_back(std::move(item));
}

void ServerState::deliver_local(const std::string& to_account, std::uint32_t slot,
                                MailboxItem item) {
    if (!accounts_.contains(to_account)) fail(Errc::unknown_account, to_account);
    mailboxes_[{to_account, slot}].push_back(std::move(item));
}

std::uint64_t ServerState::tie_rank(std::uint64_t token) const {
    return splitmix64(tie_seed_ ^ token);
}

bool ServerState::is_slot_winner(const Connection& conn) const {
    for (const auto& [token, other] : connections_) {
        if (other.revoked || token == conn.token) continue;
        if (other.account_id != conn.account_id || other.slot != conn.slot) continue;
        auto mine = std::make_pair(conn.session_refresh_tick, tie_rank(conn.token));
        auto theirs = std::make_pair(other.session_refresh_tick, tie_rank(other.token));
        if (theirs > mine) return false;
    }
    return true;
}

std::vector<MailboxItem> ServerState::fetch(std::uint64_t token) {
    Connection& conn = connection(token);
    if (!is_slot_winner(conn)) return {};  // contended slot: this connection waits
    auto it = mailboxes_.find({conn.account_id, conn.slot});
    if (it == mailboxes_.end()) return {};
    std::vector<MailboxItem> items(it->second.begin(), it->second.end());
    it->second.clear();
    return items;
}

std::size_t ServerState::mailbox_depth(const std::string& account_id, std::uint32_t slot) const {
    auto it = mailboxes_.find({account_id, slot});
    return it == mailboxes_.end() ? 0 : it->second.size();
}

std::vector<CloudMessage> ServerState::fetch_cloud_history(std::uint64_t token,
                                                           const std::string& account_id) {
    Connection& conn = connection(token);
    if (conn.account_id != account_id) fail(Errc::bad_credentials, "token bound to another account");
    const AccountRecord& record = account(account_id);
    if (!record.cloud_enabled) fail(Errc::not_supported, "account has no cloud history");
    auto it = cloud_.find(account_id);
    return it == cloud_.end() ? std::vector<CloudMessage>{} : it->second;
}

void ServerState::cloud_store(const std::string& account_id, CloudMessage message) {
    cloud_[account_id].push_back(std::move(message));
}

linking::LinkRecord& ServerState::add_link(const std::string& account_id,
                                           linking::LinkRecord record, std::uint64_t now) {
    AccountRecord& acct = account(account_id);
    record.slot = acct.next_slot++;
    record.linked_at = now;
    record.active = true;
    acct.device_list.push_back(std::move(record));
    return acct.device_list.back();
}

linking::LinkRecord* ServerState::find_link(const std::string& account_id,
                                            const std::string& device_id) {
    AccountRecord& acct = account(account_id);
    for (auto& link : acct.device_list) {
        if (link.companion_device_id == device_id) return &link;
    }
    return nullptr;
}

void ServerState::deactivate_link(const std::string& account_id, std::uint32_t slot) {
    AccountRecord& acct = account(account_id);
    for (auto& link : acct.device_list) {
        if (link.slot == slot) link.active = false;
    }
    for (auto& [token, conn] : connections_) {
        if (conn.account_id == account_id && conn.slot == slot) conn.revoked = true;
    }
}

std::vector<linking::LinkRecord> ServerState::expire_links(std::uint64_t now) {
    std::vector<linking::LinkRecord> expired;
    for (auto& [account_id, acct] : accounts_) {
        for (auto& link : acct.device_list) {
            if (link.active && link.expires_at && *link.expires_at <= now) {
                link.active = false;
                expired.push_back(link);
                for (auto& [token, conn] : connections_) {
                    if (conn.account_id == account_id && conn.slot == link.slot) {
                        conn.revoked = true;
                    }
                }
            }
        }
    }
    return expired;
}

void ServerState::push_notification(const std::string& account_id, Notification note) {
    account(account_id).notification_queue.push_back(std::move(note));
}

Bytes ServerState::serialize() const {
    Bytes out;
    append_u32(out, static_cast<std::uint32_t>(accounts_.size()));
    for (const auto& [id, acct] : accounts_) {
        append_field(out, id);
        append_field(out, acct.identity_public);
        append_field(out, acct.account_password);
        append_field(out, acct.primary_session_token);
        append_field(out, acct.primary_device_id);
        append_u32(out, static_cast<std::uint32_t>(acct.bundles.size()));
        for (const auto& [slot, bundle] : acct.bundles) {
            append_u32(out, slot);
            append_field(out, bundle.base.identity_public);
            append_field(out, bundle.base.signed_prekey_public);
            append_field(out, bundle.base.signed_prekey_signature);
            append_u32(out, static_cast<std::uint32_t>(bundle.one_time_pool.size()));
            for (const auto& [otp_id, pub] : bundle.one_time_pool) {
                append_u32(out, otp_id);
                append_field(out, pub);
            }
        }
        append_u32(out, static_cast<std::uint32_t>(acct.device_list.size()));
        for (const auto& link : acct.device_list) {
            append_field(out, link.companion_device_id);
            append_field(out, link.companion_identity_public);
            append_u32(out, link.slot);
            append_u64(out, link.linked_at);
            out.push_back(link.active ? 1 : 0);
            append_field(out, link.bound_fingerprint);
            if (link.auth_key) append_field(out, *link.auth_key);
        }
    }
    append_u32(out, static_cast<std::uint32_t>(mailboxes_.size()));
    for (const auto& [key, queue] : mailboxes_) {
        append_field(out, key.first);
        append_u32(out, key.second);
        append_u32(out, static_cast<std::uint32_t>(queue.size()));
        for (const auto& item : queue) {
            out.push_back(static_cast<std::uint8_t>(item.kind));
            append_u64(out, item.message_id);
            append_field(out, item.from_account);
            append_field(out, item.conversation_id);
            if (item.envelope) append_field(out, item.envelope->serialize());
            if (item.secret_envelope) append_field(out, item.secret_envelope->ciphertext);
            append_field(out, item.note);
        }
    }
    append_u32(out, static_cast<std::uint32_t>(cloud_.size()));
    for (const auto& [id, messages] : cloud_) {
        append_field(out, id);
        append_u32(out, static_cast<std::uint32_t>(messages.size()));
        for (const auto& m : messages) {
            append_u64(out, m.message_id);
            append_field(out, m.conversation_id);
            append_field(out, m.author_account);
            append_field(out, m.body);
        }
    }
    return out;
}

}  // namespace tmdelta::server
