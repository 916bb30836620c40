#pragma once

#include <stdexcept>
#include <string>

namespace qfe {

// Failure categories surfaced by the library. The CLI maps any of these to
// exit code 2; everything else (bad flags) is a usage error.
enum class errc {
    format,                 // malformed input table (missing column, bad header)
    parse,                  // non-numeric cell, unreadable value
    empty_input,            // table or series with no rows
    unusable_sequence,      // no valid frames survive preprocessing
    data,                   // NaN/inf cells, inconsistent columns
    lookup,                 // unknown category or key
    missing_feature,        // a required feature is absent from a frame
    domain,                 // value outside an operation's domain
    insufficient_data,      // series too short for the requested operation
    shape,                  // length or dimension mismatch
    numerical,              // singular matrix, failed decomposition
    degenerate_series,      // zero-variance series where variation is required
    degenerate_structure,   // factor model cannot be formed
    singular_design,        // collinear regressors
    empty_report,           // aggregation over zero usable units
    zero_spread,            // constant sample where spread is required
    undefined_reference,    // all-zero reference series (MARPE)
    undefined_correlation,  // constant series in a correlation
};

[[nodiscard]] inline const char* errc_name(errc c) {
    switch (c) {
        case errc::format: return "format";
        case errc::parse: return "parse";
        case errc::empty_input: return "empty_input";
        case errc::unusable_sequence: return "unusable_sequence";
        case errc::data: return "data";
        case errc::lookup: return "lookup";
        case errc::missing_feature: return "missing_feature";
        case errc::domain: return "domain";
        case errc::insufficient_data: return "insufficient_data";
        case errc::shape: return "shape";
        case errc::numerical: return "numerical";
        case errc::degenerate_series: return "degenerate_series";
        case errc::degenerate_structure: return "degenerate_structure";
        case errc::singular_design: return "singular_design";
        case errc::empty_report: return "empty_report";
        case errc::zero_spread: return "zero_spread";
        case errc::undefined_reference: return "undefined_reference";
        case errc::undefined_correlation: return "undefined_correlation";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    [[nodiscard]] errc code() const noexcept { return code_; }

private:
    errc code_;
};

}  // namespace qfe
