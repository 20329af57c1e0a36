#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tmdelta/device.hpp"
#include "tmdelta/linking.hpp"
#include "tmdelta/server.hpp"
#include "tmdelta/suite.hpp"

namespace tmdelta::sim {

struct TranscriptEvent {
    std::uint64_t seq = 0;
    std::uint64_t tick = 0;
    std::string kind;
    std::string actor;
    std::string detail;

    std::string id() const { return "ev" + std::to_string(seq); }
};

struct EntityInfo {
    std::string name;
    bool has_account = false;
    std::string username;
    std::optional<std::string> phone_token;
    std::string primary_device_id;
    std::vector<std::string> companion_device_ids;
};

struct WorldConfig {
    crypto::SuiteKind suite = crypto::SuiteKind::toy;
    std::uint64_t seed = 0;
    linking::AppProfile profile;
    bool pseudonymous_ids = false;  // username-only registration (no phone tokens)
};

// Owns the clock, the server, every device, and the only Rng. All mutation
// runs on this single event loop; one operation at a time.
class World {
public:
    explicit World(WorldConfig config);

    const crypto::Suite& suite() const { return *suite_; }
    Rng& rng() { return rng_; }
    server::ServerState& server() { return server_; }
    const server::ServerState& server() const { return server_; }
    const linking::AppProfile& profile() const { return config_.profile; }
    bool pseudonymous_ids() const { return config_.pseudonymous_ids; }
    std::uint64_t now() const { return clock_; }

    // --- topology ------------------------------------------------------
    void add_entity(const std::string& name, bool with_account = true);
    void set_victim(const std::string& name);
    std::string enroll_companion_for(const std::string& entity_name);
    void add_contact(const std::string& owner, const std::string& contact);
    void add_group(const std::string& group_id, const std::vector<std::string>& members);

    // --- time ----------------------------------------------------------
    void advance(std::uint64_t ticks = 1);
    void advance_to(std::uint64_t tick);
    void deliver_all();

    // --- messaging -----------------------------------------------------
    std::uint64_t send_dm(const std::string& from_entity, const std::string& to_entity,
                          const std::string& body, bool from_companion = false);
    std::uint64_t send_secret(const std::string& from_entity, const std::string& to_entity,
                              const std::string& body, bool from_companion = false);
    std::uint64_t send_group(const std::string& from_entity, const std::string& group_id,
                             const std::string& body, bool from_companion = false);
    std::uint64_t send_from_device(const std::string& device_id, const std::string& to_entity,
                                   const std::string& body);
    std::uint64_t send_secret_from_device(const std::string& device_id,
                                          const std::string& to_entity, const std::string& body);

    // --- lifecycle -----------------------------------------------------
    linking::LaunchResult launch_device(const std::string& device_id);
    void disconnect_device(const std::string& device_id);
    void delink_companion(const std::string& entity_name, const std::string& companion_device_id);

    // --- devices -------------------------------------------------------
    bool has_device(const std::string& device_id) const { return devices_.contains(device_id); }
    device::DeviceState& device(const std::string& device_id);
    const device::DeviceState& device(const std::string& device_id) const;
    void put_device(device::DeviceState state);
    std::optional<std::uint64_t> token_of(const std::string& device_id) const;
    void set_token(const std::string& device_id, std::optional<std::uint64_t> token);
    device::StateImage export_device_image(const std::string& device_id);
    Bytes fresh_hardware_tag();

    // --- entities ------------------------------------------------------
    const EntityInfo& entity(const std::string& name) const;
    const std::map<std::string, EntityInfo>& entities() const { return entities_; }
    const std::string& victim() const { return victim_; }
    std::string victim_primary_id() const;
    std::string victim_companion_id() const;  // first companion
    const std::map<std::string, std::vector<std::string>>& groups() const { return groups_; }

    // --- transcript ----------------------------------------------------
    const std::vector<TranscriptEvent>& transcript() const { return transcript_; }
    const TranscriptEvent& log(const std::string& kind, const std::string& actor,
                               const std::string& detail);

private:
    struct SlotTarget {
        std::string account_id;
        std::uint32_t slot = 0;
    };

    std::uint64_t send_message(const std::string& sender_device_id,
                               const std::vector<std::string>& to_accounts,
                               const std::string& conversation_id, const std::string& group_id,
                               const std::string& body);
    std::uint64_t send_secret_message(const std::string& sender_device_id,
                                      const std::string& to_device_id, const std::string& body);
    void deliver_device(const std::string& device_id);
    void handle_item(device::DeviceState& dev, const server::MailboxItem& item);
    std::vector<SlotTarget> slots_of_account(const std::string& account_id) const;
    std::vector<std::string> conversation_members(const std::string& conversation_id) const;

    WorldConfig config_;
    const crypto::Suite* suite_;
    Rng rng_;
    server::ServerState server_;
    std::map<std::string, EntityInfo> entities_;
    std::map<std::string, device::DeviceState> devices_;
    std::map<std::string, std::uint64_t> tokens_;
    std::map<std::string, std::vector<std::string>> groups_;
    std::string victim_;
    std::uint64_t clock_ = 0;
    std::uint64_t next_message_id_ = 1;
    std::uint64_t next_event_ = 1;
    std::uint32_t next_phone_ = 1;
    std::uint32_t next_hardware_ = 1;
    std::vector<TranscriptEvent> transcript_;
};

// Message payload carried inside every sealed envelope.
struct MessagePayload {
    std::string conversation_id;
    std::string author;
    std::string body;
    std::uint64_t message_id = 0;
    std::uint64_t tick = 0;
    std::string group_id;

    Bytes serialize() const;
    static MessagePayload deserialize(std::span<const std::uint8_t> data);
};

std::string dm_conversation_id(const std::string& a, const std::string& b);
std::string group_conversation_id(const std::string& group_id);

}  // namespace tmdelta::sim
