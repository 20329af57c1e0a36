#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tmdelta/device.hpp"
#include "tmdelta/profile.hpp"
#include "tmdelta/server.hpp"

namespace tmdelta::linking {

enum class LaunchStatus { online, offline_only, clone_exit, auth_failure };

std::string launch_status_name(LaunchStatus s);

struct LaunchResult {
    LaunchStatus status = LaunchStatus::auth_failure;
    std::optional<std::uint64_t> token;
    std::string detail;
};

// Companion enrollment. The QR scan is modeled as an authenticated
// out-of-band channel carrying one primary-signed enrollment token; the
// server rejects anything else. Throws already_linked / unauthorized.
LinkRecord enroll_companion(device::DeviceState& primary, device::DeviceState& companion,
                            server::ServerState& server, const AppProfile& profile,
                            const crypto::Suite& suite, Rng& rng, std::uint64_t now);

// Launch semantics by archetype:
//   independent_companion_key + valid slot credential  -> online
//   identity_key_transfer without an installed identity -> clone_exit
//   device_pinned_key with a fingerprint mismatch       -> auth_failure
//   no identity but readable metadata                   -> offline_only
LaunchResult launch_companion(device::DeviceState& companion, server::ServerState& server,
                              const crypto::Suite& suite, std::uint64_t now);

// Throws unknown_companion.
void delink(device::DeviceState& primary, server::ServerState& server,
            const std::string& companion_device_id, std::uint64_t now);

std::vector<LinkRecord> expire_links(server::ServerState& server, std::uint64_t now);

// Server-side check used by enroll: signature by the account identity over
// (account_id, companion device id, tick).
Bytes enrollment_token_message(const std::string& account_id, const std::string& companion_device_id,
                               std::uint64_t now);

}  // namespace tmdelta::linking
