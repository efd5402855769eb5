#include "errors.hpp"

namespace pisindy {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_argument: return "InvalidArgument";
        case ErrorCode::dimension_mismatch: return "DimensionMismatch";
        case ErrorCode::length_mismatch: return "LengthMismatch";
        case ErrorCode::empty_series: return "EmptySeries";
        case ErrorCode::non_positive_threshold: return "NonPositiveThreshold";
        case ErrorCode::degenerate_input: return "DegenerateInput";
        case ErrorCode::degenerate_reference: return "DegenerateReference";
        case ErrorCode::non_convergence: return "NonConvergence";
        case ErrorCode::malformed_file: return "MalformedFile";
        case ErrorCode::schema_version_mismatch: return "SchemaVersionMismatch";
        case ErrorCode::unknown_units: return "UnknownUnits";
        case ErrorCode::stability_violation: return "StabilityViolation";
        case ErrorCode::divergence: return "Divergence";
        case ErrorCode::protocol_misuse: return "ProtocolMisuse";
        case ErrorCode::bad_magic: return "BadMagic";
        case ErrorCode::unsupported_version: return "UnsupportedVersion";
        case ErrorCode::truncated_frame: return "TruncatedFrame";
        case ErrorCode::malformed_frame: return "MalformedFrame";
        case ErrorCode::provider_fault: return "ProviderFault";
        case ErrorCode::config_error: return "ConfigError";
        case ErrorCode::io_error: return "IoError";
        case ErrorCode::internal_error: return "InternalError";
    }
    return "UnknownError";
}

} // namespace pisindy
