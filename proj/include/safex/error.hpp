#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace safex {

enum class ErrorCode {
  Validation,         // malformed input value or schema violation
  Parse,              // query grammar error
  Ordering,           // non-monotonic trace tick
  EnvelopeViolation,  // SafetyParams hash mismatch
  Referent,           // unknown entity id or unresolved anaphor
  Conflict,           // mutually exclusive what-if deltas
  UnknownTick,        // no decision record at the requested tick
  EndOfScenario,      // stepping past the horizon
  Format,             // malformed trace stream
  Integrity,          // trace record digest does not match its content
};

constexpr std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::Validation: return "validation_error";
    case ErrorCode::Parse: return "parse_error";
    case ErrorCode::Ordering: return "ordering_error";
    case ErrorCode::EnvelopeViolation: return "envelope_violation";
    case ErrorCode::Referent: return "referent_error";
    case ErrorCode::Conflict: return "conflict_error";
    case ErrorCode::UnknownTick: return "unknown_tick";
    case ErrorCode::EndOfScenario: return "end_of_scenario";
    case ErrorCode::Format: return "format_error";
    case ErrorCode::Integrity: return "integrity_error";
  }
  return "error";
}

/// Every failure in the library is reported through this type. `path` names the
/// offending field (scenario key path, wire field path, line number, ...) when
/// one exists.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, std::string message, std::string path = {})
      : std::runtime_error(std::move(message)), code_(code), path_(std::move(path)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& path() const noexcept { return path_; }

private:
  ErrorCode code_;
  std::string path_;
};

}  // namespace safex
