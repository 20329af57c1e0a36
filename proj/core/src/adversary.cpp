#include "tmdelta/adversary.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace tmdelta::adversary {

namespace {

constexpr std::uint64_t kContinuityBoundTicks = 10;

bool is_clone_dependent(AttackStep step) {
    return step != AttackStep::copy_state && step != AttackStep::check_victim_continuity;
}

}  // namespace

std::string attack_step_name(AttackStep step) {
    switch (step) {
        case AttackStep::copy_state: return "copy_state";
        case AttackStep::instantiate_clone: return "instantiate_clone";
        case AttackStep::decrypt_history: return "decrypt_history";
        case AttackStep::receive_future: return "receive_future";
        case AttackStep::send_as_victim: return "send_as_victim";
        case AttackStep::capture_credentials: return "capture_credentials";
        case AttackStep::delink_then_reconnect: return "delink_then_reconnect";
        case AttackStep::initiate_secret_chat: return "initiate_secret_chat";
        case AttackStep::extract_metadata: return "extract_metadata";
        case AttackStep::check_victim_continuity: return "check_victim_continuity";
    }
    return "unknown";
}

AttackStep attack_step_from_name(std::string_view name) {
    for (AttackStep step : default_steps()) {
        if (attack_step_name(step) == name) return step;
    }
    fail(Errc::config_invalid, "unknown attack step '" + std::string(name) + "'");
}

std::string step_status_name(StepStatus status) {
    switch (status) {
        case StepStatus::succeeded: return "succeeded";
        case StepStatus::failed: return "failed";
        case StepStatus::not_applicable: return "not_applicable";
    }
    return "unknown";
}

const std::vector<AttackStep>& default_steps() {
    static const std::vector<AttackStep> steps = {
        AttackStep::copy_state,          AttackStep::instantiate_clone,
        AttackStep::decrypt_history,     AttackStep::receive_future,
        AttackStep::send_as_victim,      AttackStep::capture_credentials,
        AttackStep::delink_then_reconnect, AttackStep::initiate_secret_chat,
        AttackStep::extract_metadata,    AttackStep::check_victim_continuity,
    };
    return steps;
}

void validate_plan(const AttackPlan& plan) {
    bool copied = false;
    for (AttackStep step : plan.steps) {
        if (step == AttackStep::copy_state) copied = true;
        if (is_clone_dependent(step) && !copied) {
            fail(Errc::config_invalid,
                 "attack step '" + attack_step_name(step) + "' precedes copy_state");
        }
    }
}

const StepResult* AttackOutcome::find(AttackStep step) const {
    for (const auto& result : steps) {
        if (result.step == step) return &result;
    }
    return nullptr;
}

StepStatus AttackOutcome::status_of(AttackStep step) const {
    const StepResult* result = find(step);
    return result ? result->status : StepStatus::not_applicable;
}

Bytes AttackOutcome::serialize() const {
    Bytes out;
    append_field(out, profile_name);
    append_u32(out, static_cast<std::uint32_t>(steps.size()));
    for (const auto& result : steps) {
        append_field(out, attack_step_name(result.step));
        append_field(out, step_status_name(result.status));
        append_field(out, result.reason);
        append_u32(out, static_cast<std::uint32_t>(result.evidence.size()));
        for (const auto& ref : result.evidence) {
            append_field(out, ref.event_id);
            append_field(out, ref.kind);
            append_field(out, ref.detail);
        }
    }
    out.push_back(clone_instantiated ? 1 : 0);
    out.push_back(clone_online ? 1 : 0);
    out.push_back(spoof_indistinguishable ? 1 : 0);
    out.push_back(victim_continuity_intact ? 1 : 0);
    out.push_back(secret_chat_undetected ? 1 : 0);
    append_field(out, clone_device_id);
    append_u32(out, static_cast<std::uint32_t>(evidence.contacts.size()));
    for (const auto& c : evidence.contacts) {
        append_field(out, c.entity);
        append_field(out, c.username);
        append_field(out, c.phone_token.value_or(""));
        append_field(out, c.ref.event_id);
    }
    append_u32(out, static_cast<std::uint32_t>(evidence.conversations.size()));
    for (const auto& c : evidence.conversations) {
        append_field(out, c.conversation_id);
        out.push_back(c.group ? 1 : 0);
        for (const auto& p : c.participants) append_field(out, p);
        for (auto t : c.ticks) append_u64(out, t);
    }
    append_u32(out, static_cast<std::uint32_t>(evidence.messages.size()));
    for (const auto& m : evidence.messages) {
        append_field(out, m.conversation_id);
        append_field(out, m.author);
        append_u64(out, m.tick);
        append_u64(out, m.message_id);
        append_field(out, m.body.value_or(""));
        for (const auto& mention : m.mentions) append_field(out, mention);
    }
    append_u32(out, static_cast<std::uint32_t>(evidence.credentials.size()));
    for (const auto& c : evidence.credentials) {
        append_field(out, c.account_id);
        out.push_back(c.has_password ? 1 : 0);
        out.push_back(c.has_auth_key ? 1 : 0);
    }
    return out;
}

std::vector<std::string> extract_mentions(const std::string& body) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '@') continue;
        std::size_t j = i + 1;
        while (j < body.size() &&
               (std::isalnum(static_cast<unsigned char>(body[j])) || body[j] == '_' ||
                body[j] == '-')) {
            ++j;
        }
        if (j > i + 1) out.push_back(body.substr(i + 1, j - i - 1));
        i = j;
    }
    return out;
}

namespace {

class PlanRunner {
public:
    PlanRunner(sim::World& world, const AttackPlan& plan) : world_(world), plan_(plan) {}

    AttackOutcome run() {
        outcome_.profile_name = world_.profile().name;
        probe_contact_ = pick_probe_contact();
        for (AttackStep step : plan_.steps) {
            StepResult result;
            result.step = step;
            if (is_clone_dependent(step) && clone_unusable_) {
                result.status = StepStatus::not_applicable;
                result.reason = "clone never instantiated";
                outcome_.steps.push_back(std::move(result));
                continue;
            }
            switch (step) {
                case AttackStep::copy_state: run_copy(result); break;
                case AttackStep::instantiate_clone: run_instantiate(result); break;
                case AttackStep::decrypt_history: run_decrypt_history(result); break;
                case AttackStep::receive_future: run_receive_future(result); break;
                case AttackStep::send_as_victim: run_send_as_victim(result); break;
                case AttackStep::capture_credentials: run_capture_credentials(result); break;
                case AttackStep::delink_then_reconnect: run_delink_reconnect(result); break;
                case AttackStep::initiate_secret_chat: run_initiate_secret_chat(result); break;
                case AttackStep::extract_metadata: run_extract_metadata(result); break;
                case AttackStep::check_victim_continuity: run_continuity(result); break;
            }
            outcome_.steps.push_back(std::move(result));
        }
        return outcome_;
    }

private:
    std::string pick_probe_contact() {
        const auto& victim_primary = world_.device(world_.victim_primary_id());
        for (const auto& contact : victim_primary.contacts) {
            if (world_.entities().contains(contact.entity) &&
                world_.entity(contact.entity).has_account) {
                return contact.entity;
            }
        }
        fail(Errc::invalid_argument, "victim has no third-party contact to probe against");
    }

    EvidenceRef log_evidence(const std::string& kind, const std::string& detail) {
        const auto& event = world_.log("evidence", "attacker", kind + " " + detail);
        return EvidenceRef{event.id(), kind, detail};
    }

    void run_copy(StepResult& result) {
        if (plan_.no_access) {
            result.status = StepStatus::failed;
            result.reason = "no short-lived access; nothing copied";
            clone_unusable_ = true;
            return;
        }
        image_ = world_.export_device_image(world_.victim_companion_id());
        result.status = StepStatus::succeeded;
        result.evidence.push_back(log_evidence(
            "state_image", std::to_string(image_.records.size()) + " records copied"));
    }

    void run_instantiate(StepResult& result) {
        device::DeviceDescriptor desc;
        desc.device_id = "attacker-clone";
        desc.kind = device::DeviceKind::desktop_companion;
        desc.hardware_tag =
            plan_.attacker_hardware_tag ? *plan_.attacker_hardware_tag : world_.fresh_hardware_tag();
        device::DeviceState fresh =
            device::create_device(desc, world_.profile(), world_.suite(), world_.rng());
        device::DeviceState clone = device::import_image(fresh, image_, world_.suite());
        world_.put_device(std::move(clone));
        outcome_.clone_device_id = desc.device_id;

        linking::LaunchResult launch = world_.launch_device(desc.device_id);
        switch (launch.status) {
            case linking::LaunchStatus::online:
                outcome_.clone_instantiated = true;
                outcome_.clone_online = true;
                result.status = StepStatus::succeeded;
                result.reason = "online";
                result.evidence.push_back(log_evidence("clone_launch", "online as victim slot"));
                break;
            case linking::LaunchStatus::offline_only:
                outcome_.clone_instantiated = true;
                result.status = StepStatus::succeeded;
                result.reason = "offline_only";
                result.evidence.push_back(
                    log_evidence("clone_launch", "runs offline, server unreachable"));
                break;
            case linking::LaunchStatus::clone_exit:
            case linking::LaunchStatus::auth_failure:
                result.status = StepStatus::failed;
                result.reason = linking::launch_status_name(launch.status) +
                                (launch.detail.empty() ? "" : ": " + launch.detail);
                clone_unusable_ = true;
                break;
        }
    }

    void run_decrypt_history(StepResult& result) {
        const auto& clone = world_.device(outcome_.clone_device_id);
        std::size_t recovered = 0;
        for (const auto& entry : clone.message_log) {
            if (entry.body.empty()) continue;
            recovered += 1;
            MessageEvidence ev;
            ev.conversation_id = entry.conversation_id;
            ev.author = entry.author;
            ev.tick = entry.tick;
            ev.message_id = entry.message_id;
            ev.body = entry.body;
            ev.mentions = extract_mentions(entry.body);
            ev.ref = log_evidence("plaintext", "m" + std::to_string(entry.message_id));
            result.evidence.push_back(ev.ref);
            outcome_.evidence.messages.push_back(std::move(ev));
        }
        if (world_.profile().cloud_history && outcome_.clone_online) {
            auto token = world_.token_of(outcome_.clone_device_id);
            if (token) {
                auto history = world_.server().fetch_cloud_history(
                    *token, clone.credentials->account_id);
                for (const auto& m : history) {
                    recovered += 1;
                    MessageEvidence ev;
                    ev.conversation_id = m.conversation_id;
                    ev.author = m.author_account;
                    ev.tick = m.tick;
                    ev.message_id = m.message_id;
                    ev.body = m.body;
                    ev.mentions = extract_mentions(m.body);
                    ev.ref = log_evidence("plaintext", "cloud m" + std::to_string(m.message_id));
                    result.evidence.push_back(ev.ref);
                    outcome_.evidence.messages.push_back(std::move(ev));
                }
            }
        }
        if (recovered > 0) {
            result.status = StepStatus::succeeded;
            result.reason = std::to_string(recovered) + " plaintexts recovered";
        } else {
            result.status = StepStatus::failed;
            result.reason = "no readable message history";
        }
    }

    void run_receive_future(StepResult& result) {
        if (!outcome_.clone_online) {
            result.status = StepStatus::failed;
            result.reason = "clone not online";
            return;
        }
        world_.advance(1);
        std::uint64_t message_id =
            world_.send_dm(probe_contact_, world_.victim(), "are you still there?");
        world_.advance(1);
        const auto& clone = world_.device(outcome_.clone_device_id);
        bool got = std::any_of(clone.message_log.begin(), clone.message_log.end(),
                               [&](const device::LogEntry& e) { return e.message_id == message_id; });
        if (got) {
            result.status = StepStatus::succeeded;
            result.reason = "future message decrypted on clone";
            MessageEvidence ev;
            ev.conversation_id = sim::dm_conversation_id(probe_contact_, world_.victim());
            ev.author = probe_contact_;
            ev.tick = world_.now();
            ev.message_id = message_id;
            ev.body = "are you still there?";
            ev.ref = log_evidence("future_plaintext", "m" + std::to_string(message_id));
            result.evidence.push_back(ev.ref);
            outcome_.evidence.messages.push_back(std::move(ev));
        } else {
            result.status = StepStatus::failed;
            result.reason = "clone did not receive the probe";
        }
    }

    void run_send_as_victim(StepResult& result) {
        if (!outcome_.clone_online) {
            result.status = StepStatus::failed;
            result.reason = "clone not online";
            return;
        }
        std::uint64_t message_id;
        try {
            message_id = world_.send_from_device(outcome_.clone_device_id, probe_contact_,
                                                 "psst, it's me");
        } catch (const SimError& e) {
            result.status = StepStatus::failed;
            result.reason = e.what();
            return;
        }
        world_.advance(1);
        const auto& recipient = world_.device(world_.entity(probe_contact_).primary_device_id);
        auto entry = std::find_if(recipient.message_log.begin(), recipient.message_log.end(),
                                  [&](const device::LogEntry& e) {
                                      return e.message_id == message_id;
                                  });
        if (entry == recipient.message_log.end()) {
            result.status = StepStatus::failed;
            result.reason = "server refused or recipient never saw the message";
            return;
        }
        // nothing in the recipient's view distinguishes the clone from the victim
        bool attributed_to_victim = entry->author == world_.victim();
        outcome_.spoof_indistinguishable = attributed_to_victim;
        result.status = StepStatus::succeeded;
        result.reason = attributed_to_victim ? "delivered, attributed to victim"
                                             : "delivered with distinguishable origin";
        result.evidence.push_back(
            log_evidence("spoofed_message", "m" + std::to_string(message_id) + " accepted by " +
                                                probe_contact_));
    }

    void run_capture_credentials(StepResult& result) {
        const auto& clone = world_.device(outcome_.clone_device_id);
        device::KeyAccess access;
        try {
            access = device::open_keystore(clone, world_.suite());
        } catch (const SimError& e) {
            result.status = StepStatus::failed;
            result.reason = e.what();
            return;
        }
        if (!access.can_read(device::RecordClass::credentials) || !clone.credentials) {
            result.status = StepStatus::failed;
            result.reason = "credential vault not readable from copied state";
            return;
        }
        if (clone.credentials->device_password.empty()) {
            result.status = StepStatus::failed;
            result.reason = clone.credentials->auth_key
                                ? "auth key readable but the primary password is not stored"
                                : "no reusable credential material";
            return;
        }
        captured_ = *clone.credentials;
        result.status = StepStatus::succeeded;
        result.reason = "primary device id and password captured";
        CredentialEvidence ev;
        ev.account_id = captured_->account_id;
        ev.has_password = true;
        ev.has_auth_key = captured_->auth_key.has_value();
        ev.ref = log_evidence("credentials", "account " + captured_->account_id);
        result.evidence.push_back(ev.ref);
        outcome_.evidence.credentials.push_back(std::move(ev));
    }

    void run_delink_reconnect(StepResult& result) {
        // the victim notices something and de-links the desktop slot, which
        // cuts off the legitimate desktop and the clone alike
        world_.delink_companion(world_.victim(), world_.victim_companion_id());
        world_.advance(1);

        linking::LaunchResult relaunch = world_.launch_device(outcome_.clone_device_id);
        if (relaunch.status == linking::LaunchStatus::online) {
            // de-linking failed to lock the clone out at all
            result.status = StepStatus::succeeded;
            result.reason = "slot credential still accepted after de-link";
            result.evidence.push_back(log_evidence("reconnect", "slot credential reuse"));
            return;
        }
        if (!captured_ || captured_->device_password.empty()) {
            result.status = StepStatus::failed;
            result.reason = "de-linked and no captured credentials to reconnect with";
            outcome_.clone_online = false;
            return;
        }

        auto& clone = world_.device(outcome_.clone_device_id);
        server::AuthRequest req;
        req.account_id = captured_->account_id;
        req.password = captured_->device_password;
        req.device_id = clone.descriptor.device_id;
        req.identity_public = clone.identity ? clone.identity->public_key : Bytes{};
        req.fingerprint = crypto::fingerprint_of(clone.descriptor.hardware_tag);
        std::uint64_t token;
        try {
            token = world_.server().authenticate(req, world_.now());
        } catch (const SimError& e) {
            result.status = StepStatus::failed;
            result.reason = e.what();
            outcome_.clone_online = false;
            return;
        }
        world_.set_token(clone.descriptor.device_id, token);
        const auto& acct = world_.server().account(captured_->account_id);
        std::uint32_t new_slot = acct.device_list.back().slot;
        clone.slot_credential = device::SlotCredential{captured_->account_id, new_slot, Bytes{}};
        // republish the cloned pre-key material under the re-attached slot so
        // contacts can reach it
        server::PublishedBundle bundle;
        bundle.base.identity_public = clone.identity->public_key;
        bundle.base.signed_prekey_id = clone.prekeys.signed_prekey_id;
        bundle.base.signed_prekey_public = clone.prekeys.signed_prekey.public_key;
        bundle.base.signed_prekey_signature = world_.suite().sign(
            clone.identity->secret_key, clone.prekeys.signed_prekey.public_key);
        world_.server().publish_bundle(captured_->account_id, new_slot, std::move(bundle),
                                       world_.suite());
        world_.log("reattached", clone.descriptor.device_id,
                   "slot " + std::to_string(new_slot) + " via captured credentials");

        // prove the reconnected clone can still talk both ways
        std::uint64_t out_id =
            world_.send_from_device(outcome_.clone_device_id, probe_contact_, "back again");
        world_.advance(1);
        std::uint64_t back_id = world_.send_dm(probe_contact_, world_.victim(), "welcome back");
        world_.advance(2);
        const auto& clone_after = world_.device(outcome_.clone_device_id);
        bool received = std::any_of(
            clone_after.message_log.begin(), clone_after.message_log.end(),
            [&](const device::LogEntry& e) { return e.message_id == back_id; });
        const auto& peer = world_.device(world_.entity(probe_contact_).primary_device_id);
        bool delivered = std::any_of(
            peer.message_log.begin(), peer.message_log.end(),
            [&](const device::LogEntry& e) { return e.message_id == out_id; });
        if (received && delivered) {
            outcome_.clone_online = true;
            result.status = StepStatus::succeeded;
            result.reason = "reconnected with captured credentials; send and receive verified";
            result.evidence.push_back(log_evidence(
                "reconnect", "slot " + std::to_string(new_slot) + " send/receive verified"));
        } else {
            result.status = StepStatus::failed;
            result.reason = "reattached but message round trip failed";
        }
    }

    void run_initiate_secret_chat(StepResult& result) {
        if (!world_.profile().secret_chats) {
            result.status = StepStatus::not_applicable;
            result.reason = "profile has no secret chats";
            return;
        }
        if (!outcome_.clone_online) {
            result.status = StepStatus::failed;
            result.reason = "clone not online";
            return;
        }
        const auto& victim_primary_before = world_.device(world_.victim_primary_id());
        std::size_t alerts_before = victim_primary_before.notifications.size();
        std::uint64_t message_id;
        try {
            message_id = world_.send_secret_from_device(outcome_.clone_device_id, probe_contact_,
                                                        "let's talk privately");
        } catch (const SimError& e) {
            result.status = StepStatus::failed;
            result.reason = e.what();
            return;
        }
        world_.advance(1);
        const auto& peer = world_.device(world_.entity(probe_contact_).primary_device_id);
        bool delivered = std::any_of(
            peer.message_log.begin(), peer.message_log.end(),
            [&](const device::LogEntry& e) { return e.message_id == message_id && e.secret_chat; });
        if (!delivered) {
            result.status = StepStatus::failed;
            result.reason = "secret chat not accepted";
            return;
        }
        const auto& victim_primary_after = world_.device(world_.victim_primary_id());
        outcome_.secret_chat_undetected =
            victim_primary_after.notifications.size() == alerts_before;
        result.status = StepStatus::succeeded;
        result.reason = outcome_.secret_chat_undetected
                            ? "secret chat initiated, victim saw nothing"
                            : "secret chat initiated but the victim was alerted";
        result.evidence.push_back(
            log_evidence("secret_chat", "m" + std::to_string(message_id) + " with " + probe_contact_));
    }

    void run_extract_metadata(StepResult& result) {
        const auto& clone = world_.device(outcome_.clone_device_id);
        for (const auto& contact : clone.contacts) {
            ContactEvidence ev;
            ev.entity = contact.entity;
            ev.username = contact.username;
            ev.phone_token = contact.phone_token;
            ev.ref = log_evidence("contact", contact.entity);
            result.evidence.push_back(ev.ref);
            outcome_.evidence.contacts.push_back(std::move(ev));
        }
        for (const auto& [conv, participants] : clone.conversation_participants) {
            ConversationEvidence ev;
            ev.conversation_id = conv;
            ev.group = conv.rfind("group/", 0) == 0;
            ev.participants = participants;
            for (const auto& entry : clone.message_log) {
                if (entry.conversation_id == conv) ev.ticks.push_back(entry.tick);
            }
            ev.ref = log_evidence("conversation", conv);
            result.evidence.push_back(ev.ref);
            outcome_.evidence.conversations.push_back(std::move(ev));
        }
        for (const auto& group : clone.groups) {
            if (clone.conversation_participants.contains(sim::group_conversation_id(group.group_id))) {
                continue;  // already captured above
            }
            ConversationEvidence ev;
            ev.conversation_id = sim::group_conversation_id(group.group_id);
            ev.group = true;
            ev.participants = group.members;
            ev.ref = log_evidence("group", group.group_id);
            result.evidence.push_back(ev.ref);
            outcome_.evidence.conversations.push_back(std::move(ev));
        }
        // body-less timeline entries still show who wrote when
        for (const auto& entry : clone.message_log) {
            if (!entry.body.empty()) continue;  // full plaintexts were collected earlier
            MessageEvidence ev;
            ev.conversation_id = entry.conversation_id;
            ev.author = entry.author;
            ev.tick = entry.tick;
            ev.message_id = entry.message_id;
            ev.ref = log_evidence("timeline", "m" + std::to_string(entry.message_id));
            result.evidence.push_back(ev.ref);
            outcome_.evidence.messages.push_back(std::move(ev));
        }
        if (outcome_.evidence.contacts.empty() && outcome_.evidence.conversations.empty() &&
            outcome_.evidence.messages.empty()) {
            result.status = StepStatus::failed;
            result.reason = "no metadata reachable from the copied state";
        } else {
            result.status = StepStatus::succeeded;
            result.reason = std::to_string(outcome_.evidence.contacts.size()) + " contacts, " +
                            std::to_string(outcome_.evidence.conversations.size()) +
                            " conversations";
        }
    }

    void run_continuity(StepResult& result) {
        if (world_.has_device(outcome_.clone_device_id)) {
            world_.disconnect_device(outcome_.clone_device_id);
        }
        bool violated = false;
        std::string note;
        std::uint64_t ping_id = 0;
        try {
            ping_id = world_.send_dm(world_.victim(), probe_contact_, "continuity ping");
        } catch (const SimError& e) {
            violated = true;
            note = std::string("victim send failed: ") + e.what();
        }
        if (!violated) {
            world_.advance(1);
            std::uint64_t pong_id = world_.send_dm(probe_contact_, world_.victim(), "continuity pong");
            bool received = false;
            for (std::uint64_t i = 0; i < kContinuityBoundTicks && !received; ++i) {
                world_.advance(1);
                const auto& primary = world_.device(world_.victim_primary_id());
                received = std::any_of(primary.message_log.begin(), primary.message_log.end(),
                                       [&](const device::LogEntry& e) {
                                           return e.message_id == pong_id;
                                       });
            }
            if (!received) {
                violated = true;
                note = "victim primary starved beyond the contention bound";
            }
            (void)ping_id;
        }
        outcome_.victim_continuity_intact = !violated;
        if (violated) {
            result.status = StepStatus::succeeded;  // the attack achieved denial of service
            result.reason = note;
            result.evidence.push_back(log_evidence("dos", note));
        } else {
            result.status = StepStatus::failed;
            result.reason = "victim continuity intact";
        }
    }

    sim::World& world_;
    const AttackPlan& plan_;
    AttackOutcome outcome_;
    device::StateImage image_;
    std::optional<device::AccountCredentials> captured_;
    std::string probe_contact_;
    bool clone_unusable_ = false;
};

}  // namespace

AttackOutcome run_plan(sim::World& world, const AttackPlan& plan) {
    validate_plan(plan);
    PlanRunner runner(world, plan);
    return runner.run();
}

}  // namespace tmdelta::adversary
