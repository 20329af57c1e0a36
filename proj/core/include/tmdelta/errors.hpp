#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tmdelta {

// One error code per failure mode named in the module contracts. Operations
// whose failures are data (attack steps, launch results) return status enums
// instead of throwing.
enum class Errc {
    malformed_key,
    bad_signature,
    unknown_prekey,
    skipped_limit_exceeded,
    duplicate_message,
    decryption_failure,
    keystore_locked,
    already_linked,
    unauthorized,
    unknown_companion,
    duplicate_account,
    bad_credentials,
    revoked,
    revoked_connection,
    unknown_account,
    not_supported,
    unknown_profile,
    config_invalid,
    phase_mismatch,
    decode_error,
    invalid_argument,
};

std::string_view errc_name(Errc code);

class SimError : public std::runtime_error {
public:
    SimError(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
    throw SimError(code, what);
}

}  // namespace tmdelta
