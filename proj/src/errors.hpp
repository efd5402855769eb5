#pragma once

#include <stdexcept>
#include <string>

namespace pisindy {

// Stable error identifiers. Values mirror the PSY_ERR_* codes of the C API;
// keep both lists in sync (checked by static_asserts in capi.cpp).
enum class ErrorCode : int {
    invalid_argument = 1,
    dimension_mismatch = 2,
    length_mismatch = 3,
    empty_series = 4,
    non_positive_threshold = 5,
    degenerate_input = 6,
    degenerate_reference = 7,
    non_convergence = 8,
    malformed_file = 9,
    schema_version_mismatch = 10,
    unknown_units = 11,
    stability_violation = 12,
    divergence = 13,
    protocol_misuse = 14,
    bad_magic = 15,
    unsupported_version = 16,
    truncated_frame = 17,
    malformed_frame = 18,
    provider_fault = 19,
    config_error = 20,
    io_error = 21,
    internal_error = 22,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace pisindy
