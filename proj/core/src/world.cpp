#include "tmdelta/world.hpp"

#include <algorithm>

namespace tmdelta::sim {

Bytes MessagePayload::serialize() const {
    Bytes out;
    append_field(out, conversation_id);
    append_field(out, author);
    append_field(out, body);
    append_u64(out, message_id);
    append_u64(out, tick);
    append_field(out, group_id);
    return out;
}

MessagePayload MessagePayload::deserialize(std::span<const std::uint8_t> data) {
    ByteReader r{data};
    MessagePayload p;
    p.conversation_id = r.read_string_field();
    p.author = r.read_string_field();
    p.body = r.read_string_field();
    p.message_id = r.read_u64();
    p.tick = r.read_u64();
    p.group_id = r.read_string_field();
    return p;
}

std::string dm_conversation_id(const std::string& a, const std::string& b) {
    return a < b ? "dm/" + a + "|" + b : "dm/" + b + "|" + a;
}

std::string group_conversation_id(const std::string& group_id) { return "group/" + group_id; }

World::World(WorldConfig config)
    : config_(std::move(config)),
      suite_(&crypto::suite_for(config_.suite)),
      rng_(config_.seed),
      server_(Rng(config_.seed ^ 0x7453u).next_u64()) {
    linking::validate_profile(config_.profile);
}

const TranscriptEvent& World::log(const std::string& kind, const std::string& actor,
                                  const std::string& detail) {
    transcript_.push_back(TranscriptEvent{next_event_++, clock_, kind, actor, detail});
    return transcript_.back();
}

Bytes World::fresh_hardware_tag() {
    Bytes tag;
    append(tag, "hw-unit-");
    append_u32(tag, next_hardware_++);
    Bytes noise = rng_.bytes(8);
    append(tag, noise);
    return tag;
}

void World::add_entity(const std::string& name, bool with_account) {
    if (entities_.contains(name)) fail(Errc::config_invalid, "duplicate entity '" + name + "'");
    EntityInfo info;
    info.name = name;
    info.has_account = with_account;
    info.username = "@" + name;
    if (!config_.pseudonymous_ids) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "+1555%04u", next_phone_++);
        info.phone_token = buf;
    }
    if (with_account) {
        device::DeviceDescriptor desc;
        desc.device_id = name + "-phone";
        desc.kind = device::DeviceKind::primary_mobile;
        desc.hardware_tag = fresh_hardware_tag();
        device::DeviceState primary = device::create_device(desc, config_.profile, *suite_, rng_);
        primary.identity = suite_->keygen(rng_);
        device::AccountCredentials creds;
        creds.account_id = name;
        creds.device_password = rng_.bytes(16);
        primary.credentials = creds;
        Bytes primary_token = rng_.bytes(32);
        primary.slot_credential = device::SlotCredential{name, 0, primary_token};

        primary.prekeys.signed_prekey_id = 1;
        primary.prekeys.signed_prekey = suite_->keygen(rng_);
        server::PublishedBundle bundle;
        bundle.base.identity_public = primary.identity->public_key;
        bundle.base.signed_prekey_id = 1;
        bundle.base.signed_prekey_public = primary.prekeys.signed_prekey.public_key;
        bundle.base.signed_prekey_signature =
            suite_->sign(primary.identity->secret_key, primary.prekeys.signed_prekey.public_key);
        for (std::uint32_t i = 1; i <= 8; ++i) {
            crypto::KeyPair otp = suite_->keygen(rng_);
            primary.prekeys.one_time.emplace(i, otp);
            bundle.one_time_pool.emplace(i, otp.public_key);
        }
        server_.register_account(name, primary.identity->public_key, creds.device_password,
                                 primary_token, desc.device_id, std::move(bundle), *suite_,
                                 config_.profile.cloud_history, std::nullopt);

        info.primary_device_id = desc.device_id;
        devices_.emplace(desc.device_id, std::move(primary));

        server::AuthRequest req;
        req.account_id = name;
        req.slot = 0;
        req.session_token = primary_token;
        req.device_id = desc.device_id;
        std::uint64_t token = server_.authenticate(req, clock_);
        tokens_[desc.device_id] = token;
        log("account_registered", name, desc.device_id);
    }
    entities_.emplace(name, std::move(info));
}

void World::set_victim(const std::string& name) {
    if (!entities_.contains(name)) fail(Errc::config_invalid, "victim entity '" + name + "' missing");
    victim_ = name;
}

std::string World::enroll_companion_for(const std::string& entity_name) {
    EntityInfo& info = entities_.at(entity_name);
    device::DeviceDescriptor desc;
    desc.device_id = entity_name + "-desktop" +
                     (info.companion_device_ids.empty()
                          ? ""
                          : "-" + std::to_string(info.companion_device_ids.size() + 1));
    desc.kind = device::DeviceKind::desktop_companion;
    desc.hardware_tag = fresh_hardware_tag();
    device::DeviceState companion = device::create_device(desc, config_.profile, *suite_, rng_);
    device::DeviceState& primary = device(info.primary_device_id);
    linking::LinkRecord record =
        linking::enroll_companion(primary, companion, server_, config_.profile, *suite_, rng_, clock_);
    devices_.emplace(desc.device_id, std::move(companion));
    info.companion_device_ids.push_back(desc.device_id);
    log("companion_enrolled", entity_name, desc.device_id + " slot " + std::to_string(record.slot));

    linking::LaunchResult launch = launch_device(desc.device_id);
    if (launch.status != linking::LaunchStatus::online) {
        fail(Errc::invalid_argument, "legitimate companion failed to launch: " + launch.detail);
    }
    return desc.device_id;
}

void World::add_contact(const std::string& owner, const std::string& contact) {
    const EntityInfo& target = entity(contact);
    device::ContactEntry entry;
    entry.entity = target.name;
    entry.username = target.username;
    entry.phone_token = target.phone_token;
    EntityInfo& info = entities_.at(owner);
    auto add_to = [&](const std::string& device_id) {
        if (device_id.empty() || !devices_.contains(device_id)) return;
        auto& contacts = device(device_id).contacts;
        if (std::none_of(contacts.begin(), contacts.end(),
                         [&](const device::ContactEntry& c) { return c.entity == entry.entity; })) {
            contacts.push_back(entry);
        }
    };
    add_to(info.primary_device_id);
    for (const auto& id : info.companion_device_ids) add_to(id);
}

void World::add_group(const std::string& group_id, const std::vector<std::string>& members) {
    groups_[group_id] = members;
    for (const auto& member : members) {
        if (!entities_.contains(member)) continue;
        const EntityInfo& info = entities_.at(member);
        auto add_to = [&](const std::string& device_id) {
            if (device_id.empty() || !devices_.contains(device_id)) return;
            device::DeviceState& dev = device(device_id);
            dev.groups.push_back(device::GroupInfo{group_id, members});
            dev.conversation_participants[group_conversation_id(group_id)] = members;
        };
        add_to(info.primary_device_id);
        for (const auto& id : info.companion_device_ids) add_to(id);
    }
}

device::DeviceState& World::device(const std::string& device_id) {
    auto it = devices_.find(device_id);
    if (it == devices_.end()) fail(Errc::invalid_argument, "no device '" + device_id + "'");
    return it->second;
}

const device::DeviceState& World::device(const std::string& device_id) const {
    auto it = devices_.find(device_id);
    if (it == devices_.end()) fail(Errc::invalid_argument, "no device '" + device_id + "'");
    return it->second;
}

void World::put_device(device::DeviceState state) {
    std::string id = state.descriptor.device_id;
    devices_.insert_or_assign(id, std::move(state));
}

std::optional<std::uint64_t> World::token_of(const std::string& device_id) const {
    auto it = tokens_.find(device_id);
    if (it == tokens_.end() || !server_.token_live(it->second)) return std::nullopt;
    return it->second;
}

void World::set_token(const std::string& device_id, std::optional<std::uint64_t> token) {
    if (token) {
        tokens_[device_id] = *token;
    } else {
        tokens_.erase(device_id);
    }
}

device::StateImage World::export_device_image(const std::string& device_id) {
    device::StateImage image = device::export_copyable(device(device_id), *suite_);
    log("state_copied", device_id, std::to_string(image.records.size()) + " records");
    return image;
}

const EntityInfo& World::entity(const std::string& name) const {
    auto it = entities_.find(name);
    if (it == entities_.end()) fail(Errc::invalid_argument, "no entity '" + name + "'");
    return it->second;
}

std::string World::victim_primary_id() const { return entity(victim_).primary_device_id; }

std::string World::victim_companion_id() const {
    const EntityInfo& info = entity(victim_);
    if (info.companion_device_ids.empty()) {
        fail(Errc::invalid_argument, "victim has no companion device");
    }
    return info.companion_device_ids.front();
}

void World::advance(std::uint64_t ticks) {
    for (std::uint64_t i = 0; i < ticks; ++i) {
        clock_ += 1;
        auto expired = linking::expire_links(server_, clock_);
        for (const auto& link : expired) {
            log("link_expired", link.companion_device_id, "slot " + std::to_string(link.slot));
            for (auto& [id, dev] : devices_) {
                if (dev.descriptor.kind != device::DeviceKind::primary_mobile) continue;
                for (auto& mirror : dev.links) {
                    if (mirror.companion_device_id == link.companion_device_id) {
                        mirror.active = false;
                    }
                }
            }
            tokens_.erase(link.companion_device_id);
        }
        deliver_all();
    }
}

void World::advance_to(std::uint64_t tick) {
    while (clock_ < tick) advance(1);
}

void World::deliver_all() {
    for (auto& [device_id, dev] : devices_) {
        deliver_device(device_id);
    }
}

void World::deliver_device(const std::string& device_id) {
    auto token = token_of(device_id);
    if (!token) return;
    device::DeviceState& dev = device(device_id);
    const server::Connection& conn = server_.connection(*token);
    if (!server_.is_slot_winner(conn)) {
        if (server_.mailbox_depth(conn.account_id, conn.slot) > 0) {
            log("delivery_withheld", device_id,
                "slot " + std::to_string(conn.slot) + " contended");
        }
        return;
    }
    for (const auto& item : server_.fetch(*token)) {
        handle_item(dev, item);
    }
}

void World::handle_item(device::DeviceState& dev, const server::MailboxItem& item) {
    using server::MailboxItem;
    switch (item.kind) {
        case MailboxItem::Kind::alert: {
            dev.notifications.push_back(item.note);
            log("alert_delivered", dev.descriptor.device_id, item.note);
            return;
        }
        case MailboxItem::Kind::cloud_notice: {
            MessagePayload payload = MessagePayload::deserialize(to_bytes(item.note));
            device::LogEntry entry;
            entry.conversation_id = payload.conversation_id;
            entry.author = payload.author;
            entry.direction = payload.author == dev.account_id() ? device::Direction::outgoing_sync
                                                                 : device::Direction::incoming;
            entry.tick = payload.tick;
            entry.body = payload.body;
            entry.message_id = payload.message_id;
            dev.message_log.push_back(entry);
            dev.conversation_participants[payload.conversation_id] =
                conversation_members(payload.conversation_id);
            log("message_delivered", dev.descriptor.device_id,
                "m" + std::to_string(payload.message_id) + " (cloud)");
            return;
        }
        case MailboxItem::Kind::secret_envelope: {
            auto it = dev.secret_sessions.find(item.secret_envelope->chat_id);
            if (it == dev.secret_sessions.end()) {
                log("decrypt_failed", dev.descriptor.device_id,
                    "no secret session " + item.secret_envelope->chat_id);
                return;
            }
            try {
                Bytes plain = ratchet::secret_decrypt(*suite_, it->second, *item.secret_envelope);
                MessagePayload payload = MessagePayload::deserialize(plain);
                device::LogEntry entry;
                entry.conversation_id = payload.conversation_id;
                entry.author = payload.author;
                entry.direction = payload.author == dev.account_id()
                                      ? device::Direction::outgoing_sync
                                      : device::Direction::incoming;
                entry.tick = payload.tick;
                entry.body = payload.body;
                entry.message_id = payload.message_id;
                entry.secret_chat = true;
                dev.message_log.push_back(entry);
                log("message_delivered", dev.descriptor.device_id,
                    "m" + std::to_string(payload.message_id) + " (secret)");
            } catch (const SimError& e) {
                log("decrypt_failed", dev.descriptor.device_id, e.what());
            }
            return;
        }
        case MailboxItem::Kind::envelope: {
            std::string session_key = item.from_account + "#" + std::to_string(item.from_slot);
            Bytes plain;
            try {
                auto session_it = dev.sessions.find(session_key);
                if (session_it == dev.sessions.end()) {
                    if (!item.envelope->header.prekey) {
                        log("decrypt_failed", dev.descriptor.device_id,
                            "no session with " + session_key);
                        return;
                    }
                    if (!dev.identity) {
                        log("decrypt_failed", dev.descriptor.device_id, "no identity material");
                        return;
                    }
                    auto [session, first_plain] = ratchet::init_responder(
                        *suite_, rng_, *dev.identity, dev.prekeys, *item.envelope);
                    dev.sessions.emplace(session_key, std::move(session));
                    plain = std::move(first_plain);
                } else {
                    auto [next, decrypted] =
                        ratchet::ratchet_decrypt(*suite_, rng_, session_it->second, *item.envelope,
                                                 clock_);
                    session_it->second = std::move(next);
                    plain = std::move(decrypted);
                }
            } catch (const SimError& e) {
                log("decrypt_failed", dev.descriptor.device_id, e.what());
                return;
            }
            MessagePayload payload = MessagePayload::deserialize(plain);
            device::LogEntry entry;
            entry.conversation_id = payload.conversation_id;
            entry.author = payload.author;
            entry.direction = payload.author == dev.account_id() ? device::Direction::outgoing_sync
                                                                 : device::Direction::incoming;
            entry.tick = payload.tick;
            entry.body = payload.body;
            entry.message_id = payload.message_id;
            dev.message_log.push_back(entry);
            dev.conversation_participants[payload.conversation_id] =
                conversation_members(payload.conversation_id);
            log("message_delivered", dev.descriptor.device_id,
                "m" + std::to_string(payload.message_id));
            return;
        }
    }
}

std::uint64_t World::send_message(const std::string& sender_device_id,
                                  const std::vector<std::string>& to_accounts,
                                  const std::string& conversation_id, const std::string& group_id,
                                  const std::string& body) {
    device::DeviceState& sender = device(sender_device_id);
    auto token = token_of(sender_device_id);
    if (!token) fail(Errc::revoked_connection, sender_device_id + " is not online");
    if (!sender.credentials) fail(Errc::bad_credentials, sender_device_id + " has no account");

    const std::string from_account = sender.credentials->account_id;
    const std::uint64_t message_id = next_message_id_++;

    MessagePayload payload;
    payload.conversation_id = conversation_id;
    payload.author = from_account;
    payload.body = body;
    payload.message_id = message_id;
    payload.tick = clock_;
    payload.group_id = group_id;

    if (config_.profile.cloud_history) {
        // Cloud chat: the server stores the body and fans out notices.
        server::CloudMessage cloud;
        cloud.message_id = message_id;
        cloud.conversation_id = conversation_id;
        cloud.author_account = from_account;
        cloud.group_id = group_id;
        cloud.tick = clock_;
        cloud.body = body;
        std::vector<std::string> cloud_accounts = to_accounts;
        cloud_accounts.push_back(from_account);
        std::sort(cloud_accounts.begin(), cloud_accounts.end());
        cloud_accounts.erase(std::unique(cloud_accounts.begin(), cloud_accounts.end()),
                             cloud_accounts.end());
        for (const auto& account : cloud_accounts) server_.cloud_store(account, cloud);

        Bytes note = payload.serialize();
        for (const auto& account : cloud_accounts) {
            for (const auto& target : slots_of_account(account)) {
                if (account == from_account && target.slot == sender.slot()) continue;
                server::MailboxItem item;
                item.kind = server::MailboxItem::Kind::cloud_notice;
                item.tick = clock_;
                item.message_id = message_id;
                item.from_account = from_account;
                item.from_slot = sender.slot();
                item.from_device = sender_device_id;
                item.conversation_id = conversation_id;
                item.group_id = group_id;
                item.note = to_string(note);
                server_.route(*token, target.account_id, target.slot, std::move(item));
            }
        }
    } else {
        Bytes plaintext = payload.serialize();
        std::vector<SlotTarget> targets;
        for (const auto& account : to_accounts) {
            for (const auto& target : slots_of_account(account)) targets.push_back(target);
        }
        for (const auto& target : slots_of_account(from_account)) {
            if (target.slot != sender.slot()) targets.push_back(target);  // sync copies
        }
        for (const auto& target : targets) {
            std::string session_key = target.account_id + "#" + std::to_string(target.slot);
            auto session_it = sender.sessions.find(session_key);
            if (session_it == sender.sessions.end()) {
                ratchet::PreKeyBundle bundle = server_.take_bundle(target.account_id, target.slot);
                ratchet::SessionState session =
                    ratchet::init_initiator(*suite_, rng_, *sender.identity, bundle);
                session_it = sender.sessions.emplace(session_key, std::move(session)).first;
            }
            auto [next, envelope] = ratchet::ratchet_encrypt(*suite_, session_it->second, plaintext);
            session_it->second = std::move(next);

            server::MailboxItem item;
            item.kind = server::MailboxItem::Kind::envelope;
            item.tick = clock_;
            item.message_id = message_id;
            item.from_account = from_account;
            item.from_slot = sender.slot();
            item.from_device = sender_device_id;
            item.conversation_id = conversation_id;
            item.group_id = group_id;
            item.envelope = std::move(envelope);
            server_.route(*token, target.account_id, target.slot, std::move(item));
        }
    }

    device::LogEntry entry;
    entry.conversation_id = conversation_id;
    entry.author = from_account;
    entry.direction = device::Direction::outgoing;
    entry.tick = clock_;
    entry.body = body;
    entry.message_id = message_id;
    sender.message_log.push_back(entry);
    sender.conversation_participants[conversation_id] = conversation_members(conversation_id);
    log("message_sent", sender_device_id, "m" + std::to_string(message_id) + " " + conversation_id);
    return message_id;
}

std::uint64_t World::send_secret_message(const std::string& sender_device_id,
                                         const std::string& to_device_id, const std::string& body) {
    if (!config_.profile.secret_chats) {
        fail(Errc::not_supported, "profile has no secret chats");
    }
    device::DeviceState& sender = device(sender_device_id);
    device::DeviceState& receiver = device(to_device_id);
    auto token = token_of(sender_device_id);
    if (!token) fail(Errc::revoked_connection, sender_device_id + " is not online");

    std::string chat_id = sender_device_id < to_device_id
                              ? "secret/" + sender_device_id + "|" + to_device_id
                              : "secret/" + to_device_id + "|" + sender_device_id;
    auto it = sender.secret_sessions.find(chat_id);
    if (it == sender.secret_sessions.end()) {
        ratchet::RekeyPolicy policy{config_.profile.rekey_every_n_messages,
                                    config_.profile.rekey_every_ticks};
        auto [a, b] = ratchet::secret_establish(*suite_, rng_, chat_id, policy, clock_);
        it = sender.secret_sessions.emplace(chat_id, std::move(a)).first;
        receiver.secret_sessions.emplace(chat_id, std::move(b));
        log("secret_chat_started", sender_device_id, chat_id);
    }
    ratchet::SecretChatSession& mine = it->second;
    ratchet::SecretChatSession& theirs = receiver.secret_sessions.at(chat_id);
    if (ratchet::secret_needs_rekey(mine, clock_)) {
        ratchet::secret_rekey(*suite_, rng_, mine, theirs, clock_);
        log("secret_rekey", sender_device_id,
            chat_id + " epoch " + std::to_string(mine.key_epoch));
    }

    const std::uint64_t message_id = next_message_id_++;
    MessagePayload payload;
    payload.conversation_id = chat_id;
    payload.author = sender.credentials->account_id;
    payload.body = body;
    payload.message_id = message_id;
    payload.tick = clock_;
    Bytes plaintext = payload.serialize();
    ratchet::SecretEnvelope envelope = ratchet::secret_encrypt(*suite_, mine, plaintext);

    server::MailboxItem item;
    item.kind = server::MailboxItem::Kind::secret_envelope;
    item.tick = clock_;
    item.message_id = message_id;
    item.from_account = sender.credentials->account_id;
    item.from_slot = sender.slot();
    item.from_device = sender_device_id;
    item.conversation_id = chat_id;
    item.secret_envelope = std::move(envelope);
    server_.route(*token, receiver.credentials->account_id, receiver.slot(), std::move(item));

    device::LogEntry entry;
    entry.conversation_id = chat_id;
    entry.author = sender.credentials->account_id;
    entry.direction = device::Direction::outgoing;
    entry.tick = clock_;
    entry.body = body;
    entry.message_id = message_id;
    entry.secret_chat = true;
    sender.message_log.push_back(entry);
    log("message_sent", sender_device_id, "m" + std::to_string(message_id) + " (secret)");
    return message_id;
}

std::uint64_t World::send_dm(const std::string& from_entity, const std::string& to_entity,
                             const std::string& body, bool from_companion) {
    const EntityInfo& from = entity(from_entity);
    std::string device_id = from_companion ? from.companion_device_ids.at(0) : from.primary_device_id;
    return send_message(device_id, {to_entity}, dm_conversation_id(from_entity, to_entity), "",
                        body);
}

std::uint64_t World::send_secret(const std::string& from_entity, const std::string& to_entity,
                                 const std::string& body, bool from_companion) {
    const EntityInfo& from = entity(from_entity);
    std::string device_id = from_companion ? from.companion_device_ids.at(0) : from.primary_device_id;
    return send_secret_message(device_id, entity(to_entity).primary_device_id, body);
}

std::uint64_t World::send_group(const std::string& from_entity, const std::string& group_id,
                                const std::string& body, bool from_companion) {
    auto it = groups_.find(group_id);
    if (it == groups_.end()) fail(Errc::invalid_argument, "no group '" + group_id + "'");
    const EntityInfo& from = entity(from_entity);
    std::string device_id = from_companion ? from.companion_device_ids.at(0) : from.primary_device_id;
    std::vector<std::string> recipients;
    for (const auto& member : it->second) {
        if (member != from_entity && entities_.contains(member) && entity(member).has_account) {
            recipients.push_back(member);
        }
    }
    return send_message(device_id, recipients, group_conversation_id(group_id), group_id, body);
}

std::uint64_t World::send_from_device(const std::string& device_id, const std::string& to_entity,
                                      const std::string& body) {
    device::DeviceState& sender = device(device_id);
    if (!sender.credentials) fail(Errc::bad_credentials, "device has no account state");
    return send_message(device_id, {to_entity},
                        dm_conversation_id(sender.credentials->account_id, to_entity), "", body);
}

std::uint64_t World::send_secret_from_device(const std::string& device_id,
                                             const std::string& to_entity,
                                             const std::string& body) {
    return send_secret_message(device_id, entity(to_entity).primary_device_id, body);
}

linking::LaunchResult World::launch_device(const std::string& device_id) {
    device::DeviceState& dev = device(device_id);
    linking::LaunchResult result = linking::launch_companion(dev, server_, *suite_, clock_);
    log("launch", device_id, linking::launch_status_name(result.status) +
                                 (result.detail.empty() ? "" : ": " + result.detail));
    if (result.token) {
        tokens_[device_id] = *result.token;
        server_.refresh_connection(*result.token, clock_);
    }
    return result;
}

void World::disconnect_device(const std::string& device_id) {
    if (auto token = token_of(device_id)) {
        server_.disconnect(*token);
        log("disconnected", device_id, "");
    }
    tokens_.erase(device_id);
}

void World::delink_companion(const std::string& entity_name,
                             const std::string& companion_device_id) {
    const EntityInfo& info = entity(entity_name);
    device::DeviceState& primary = device(info.primary_device_id);
    linking::delink(primary, server_, companion_device_id, clock_);
    tokens_.erase(companion_device_id);
    log("delinked", entity_name, companion_device_id);
    // the companion's own mirror flips too, matching the server view
    if (devices_.contains(companion_device_id)) {
        device(companion_device_id).self_link.active = false;
    }
}

std::vector<World::SlotTarget> World::slots_of_account(const std::string& account_id) const {
    std::vector<SlotTarget> out;
    const server::AccountRecord& acct = server_.account(account_id);
    out.push_back({account_id, 0});
    for (const auto& link : acct.device_list) {
        if (link.active) out.push_back({account_id, link.slot});
    }
    return out;
}

std::vector<std::string> World::conversation_members(const std::string& conversation_id) const {
    if (conversation_id.rfind("group/", 0) == 0) {
        auto it = groups_.find(conversation_id.substr(6));
        return it == groups_.end() ? std::vector<std::string>{} : it->second;
    }
    if (conversation_id.rfind("dm/", 0) == 0) {
        std::string pair = conversation_id.substr(3);
        auto sep = pair.find('|');
        if (sep == std::string::npos) return {};
        return {pair.substr(0, sep), pair.substr(sep + 1)};
    }
    return {};
}

}  // namespace tmdelta::sim
