#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tmdelta/world.hpp"

namespace tmdelta::adversary {

enum class AttackStep {
    copy_state,
    instantiate_clone,
    decrypt_history,
    receive_future,
    send_as_victim,
    capture_credentials,
    delink_then_reconnect,
    initiate_secret_chat,
    extract_metadata,
    check_victim_continuity,
};

std::string attack_step_name(AttackStep step);
AttackStep attack_step_from_name(std::string_view name);

enum class StepStatus { succeeded, failed, not_applicable };

std::string step_status_name(StepStatus status);

// Every piece of evidence points at a transcript event, so each `possible`
// threat cell stays resolvable against the run that produced it.
struct EvidenceRef {
    std::string event_id;
    std::string kind;
    std::string detail;

    friend bool operator==(const EvidenceRef&, const EvidenceRef&) = default;
};

struct ContactEvidence {
    std::string entity;
    std::string username;
    std::optional<std::string> phone_token;
    EvidenceRef ref;
};

struct ConversationEvidence {
    std::string conversation_id;
    bool group = false;
    std::vector<std::string> participants;
    std::vector<std::uint64_t> ticks;
    EvidenceRef ref;
};

struct MessageEvidence {
    std::string conversation_id;
    std::string author;
    std::uint64_t tick = 0;
    std::uint64_t message_id = 0;
    std::optional<std::string> body;
    std::vector<std::string> mentions;
    EvidenceRef ref;
};

struct CredentialEvidence {
    std::string account_id;
    bool has_password = false;
    bool has_auth_key = false;
    EvidenceRef ref;
};

struct EvidenceSet {
    std::vector<ContactEvidence> contacts;
    std::vector<ConversationEvidence> conversations;
    std::vector<MessageEvidence> messages;
    std::vector<CredentialEvidence> credentials;

    bool empty() const {
        return contacts.empty() && conversations.empty() && messages.empty() &&
               credentials.empty();
    }
};

struct StepResult {
    AttackStep step = AttackStep::copy_state;
    StepStatus status = StepStatus::not_applicable;
    std::string reason;
    std::vector<EvidenceRef> evidence;
};

struct AttackPlan {
    std::vector<AttackStep> steps;
    bool no_access = false;  // baseline: the adversary never got near the machine
    std::optional<Bytes> attacker_hardware_tag;
};

const std::vector<AttackStep>& default_steps();
// Throws config_invalid when a clone-dependent step precedes copy_state.
void validate_plan(const AttackPlan& plan);

struct AttackOutcome {
    std::string profile_name;
    std::vector<StepResult> steps;
    bool clone_instantiated = false;  // the clone runs, online or offline
    bool clone_online = false;
    bool spoof_indistinguishable = false;
    bool victim_continuity_intact = true;
    bool secret_chat_undetected = false;
    std::string clone_device_id;
    EvidenceSet evidence;

    const StepResult* find(AttackStep step) const;
    StepStatus status_of(AttackStep step) const;
    bool succeeded(AttackStep step) const { return status_of(step) == StepStatus::succeeded; }

    // Canonical byte form for bit-exact determinism checks.
    Bytes serialize() const;
};

// Executes the plan against the live simulation. Failures are outcomes, not
// errors; the function itself only throws on misuse (unknown devices).
AttackOutcome run_plan(sim::World& world, const AttackPlan& plan);

std::vector<std::string> extract_mentions(const std::string& body);

}  // namespace tmdelta::adversary
