#include "riskdesk/error.hpp"

namespace riskdesk {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidModel: return "invalid-model";
    case ErrorCode::kIncompleteAssignment: return "incomplete-assignment";
    case ErrorCode::kQueryIsEvidence: return "query-is-evidence";
    case ErrorCode::kInconsistentEvidence: return "inconsistent-evidence";
    case ErrorCode::kStateSpaceTooLarge: return "state-space-too-large";
    case ErrorCode::kUnknownVariable: return "unknown-variable";
    case ErrorCode::kUnknownState: return "unknown-state";
    case ErrorCode::kSyntax: return "syntax-error";
    case ErrorCode::kUnknownReference: return "unknown-reference";
    case ErrorCode::kCycle: return "cycle-detected";
    case ErrorCode::kBadK: return "bad-k";
    case ErrorCode::kUnboundEvent: return "unbound-event";
    case ErrorCode::kMergeConflict: return "merge-conflict";
    case ErrorCode::kLevelMismatch: return "level-mismatch";
    case ErrorCode::kEmptyMembers: return "empty-members";
    case ErrorCode::kUnknownAction: return "unknown-action";
    case ErrorCode::kUnknownObservation: return "unknown-observation";
    case ErrorCode::kEmptyActionDomain: return "empty-action-domain";
    case ErrorCode::kFeedExhausted: return "feed-exhausted";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kDomainMismatch: return "domain-mismatch";
    case ErrorCode::kEligibility: return "eligibility-failure";
    case ErrorCode::kUnknownStructure: return "unknown-structure";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kIo: return "io-error";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

ParseError::ParseError(ErrorCode code, const std::string& message, int line,
                       int column)
    : Error(code, "line " + std::to_string(line) + ", column " +
                      std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

}  // namespace riskdesk
