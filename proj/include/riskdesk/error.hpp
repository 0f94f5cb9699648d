// Error reporting shared by every riskdesk module.
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace riskdesk {

enum class ErrorCode {
  kInvalidModel,
  kIncompleteAssignment,
  kQueryIsEvidence,
  kInconsistentEvidence,
  kStateSpaceTooLarge,
  kUnknownVariable,
  kUnknownState,
  kSyntax,
  kUnknownReference,
  kCycle,
  kBadK,
  kUnboundEvent,
  kMergeConflict,
  kLevelMismatch,
  kEmptyMembers,
  kUnknownAction,
  kUnknownObservation,
  kEmptyActionDomain,
  kFeedExhausted,
  kShapeMismatch,
  kDomainMismatch,
  kEligibility,
  kUnknownStructure,
  kInvalidConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failures carry the 1-based source position of the offending token.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, const std::string& message, int line, int column);

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace riskdesk
