#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tmdelta/profile.hpp"
#include "tmdelta/ratchet.hpp"
#include "tmdelta/suite.hpp"

namespace tmdelta::server {

struct Notification {
    std::uint64_t tick = 0;
    std::string kind;  // "link_added" | "link_removed" | "link_expired"
    std::string detail;
};

struct MailboxItem {
    enum class Kind { envelope, secret_envelope, cloud_notice, alert };
    Kind kind = Kind::envelope;
    std::uint64_t tick = 0;
    std::uint64_t message_id = 0;
    std::string from_account;
    std::uint32_t from_slot = 0;
    std::string from_device;
    std::string conversation_id;
    std::string group_id;  // empty for direct messages
    std::optional<ratchet::Envelope> envelope;
    std::optional<ratchet::SecretEnvelope> secret_envelope;
    std::string note;  // alert text / cloud reference
};

// Bundle as published: the base (identity, signed pre-key) plus a pool of
// one-time pre-key publics that are handed out once each.
struct PublishedBundle {
    ratchet::PreKeyBundle base;
    std::map<std::uint32_t, Bytes> one_time_pool;
};

struct AccountRecord {
    std::string account_id;
    Bytes identity_public;
    Bytes account_password;  // shared credential, not an end-to-end secret
    Bytes primary_session_token;
    std::string primary_device_id;
    std::map<std::uint32_t, PublishedBundle> bundles;  // per device slot
    std::vector<linking::LinkRecord> device_list;      // companions, slot >= 1
    std::deque<Notification> notification_queue;
    std::uint32_t next_slot = 1;
    bool cloud_enabled = false;
    std::optional<std::uint64_t> default_link_expiry;
};

struct Connection {
    std::uint64_t token = 0;
    std::string account_id;
    std::uint32_t slot = 0;
    std::string device_id;
    std::uint64_t session_refresh_tick = 0;
    bool revoked = false;
};

struct CloudMessage {
    std::uint64_t message_id = 0;
    std::string conversation_id;
    std::string author_account;
    std::string group_id;
    std::uint64_t tick = 0;
    std::string body;
};

struct AuthRequest {
    std::string account_id;
    std::optional<std::uint32_t> slot;
    Bytes session_token;
    Bytes password;
    std::optional<Bytes> auth_key;
    std::string device_id;
    Bytes identity_public;
    crypto::Fingerprint fingerprint;
};

// Passive data structure driven by the event loop. Holds no identity or
// pre-key secrets and, outside cloud accounts, no plaintext.
class ServerState {
public:
    explicit ServerState(std::uint64_t tie_seed) : tie_seed_(tie_seed) {}

    // Throws duplicate_account / bad_signature.
    void register_account(const std::string& account_id, const Bytes& identity_public,
                          const Bytes& account_password, const Bytes& primary_session_token,
                          const std::string& primary_device_id, PublishedBundle bundle,
                          const crypto::Suite& suite, bool cloud_enabled,
                          std::optional<std::uint64_t> default_link_expiry);

    bool has_account(const std::string& account_id) const;
    AccountRecord& account(const std::string& account_id);             // throws unknown_account
    const AccountRecord& account(const std::string& account_id) const;

    void publish_bundle(const std::string& account_id, std::uint32_t slot, PublishedBundle bundle,
                        const crypto::Suite& suite);
    // Consumes one one-time pre-key; falls back to the signed pre-key alone
    // when the pool is exhausted.
    ratchet::PreKeyBundle take_bundle(const std::string& account_id, std::uint32_t slot);

    // Token when the request matches an active slot credential, or when the
    // account password authorizes re-attaching a companion slot.
    // Throws revoked / bad_credentials.
    std::uint64_t authenticate(const AuthRequest& request, std::uint64_t now);
    void refresh_connection(std::uint64_t token, std::uint64_t now);
    void disconnect(std::uint64_t token);
    bool token_live(std::uint64_t token) const;
    Connection& connection(std::uint64_t token);  // throws revoked_connection

    // Throws revoked_connection / unknown_account.
    void route(std::uint64_t from_token, const std::string& to_account, std::uint32_t slot,
               MailboxItem item);
    void deliver_local(const std::string& to_account, std::uint32_t slot, MailboxItem item);

    // Contention rule: when several live connections claim one device slot,
    // only the one with the most recent session refresh (seeded tie-break)
    // drains the mailbox; the others see nothing until they refresh.
    std::vector<MailboxItem> fetch(std::uint64_t token);
    bool is_slot_winner(const Connection& conn) const;
    std::size_t mailbox_depth(const std::string& account_id, std::uint32_t slot) const;

    std::vector<CloudMessage> fetch_cloud_history(std::uint64_t token,
                                                  const std::string& account_id);
    void cloud_store(const std::string& account_id, CloudMessage message);

    linking::LinkRecord& add_link(const std::string& account_id, linking::LinkRecord record,
                                  std::uint64_t now);
    linking::LinkRecord* find_link(const std::string& account_id, const std::string& device_id);
    void deactivate_link(const std::string& account_id, std::uint32_t slot);
    std::vector<linking::LinkRecord> expire_links(std::uint64_t now);
    void push_notification(const std::string& account_id, Notification note);

    // Canonical dump of everything the server holds; the opacity tests scan it.
    Bytes serialize() const;

    std::map<std::string, AccountRecord>& accounts() { return accounts_; }
    const std::map<std::string, AccountRecord>& accounts() const { return accounts_; }
    std::map<std::uint64_t, Connection>& connections() { return connections_; }

private:
    std::uint64_t tie_rank(std::uint64_t token) const;

    std::map<std::string, AccountRecord> accounts_;
    std::map<std::pair<std::string, std::uint32_t>, std::deque<MailboxItem>> mailboxes_;
    std::map<std::uint64_t, Connection> connections_;
    std::map<std::string, std::vector<CloudMessage>> cloud_;
    std::uint64_t next_token_ = 1;
    std::uint64_t tie_seed_ = 0;
};

}  // namespace tmdelta::server
