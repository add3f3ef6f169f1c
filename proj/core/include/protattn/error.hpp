#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace protattn {

enum class ErrorCode {
  FileUnreadable,
  MalformedRecord,
  EmptyCorpus,
  BadMagic,
  VersionUnsupported,
  TruncatedFile,
  MalformedHeader,
  RowSumViolation,
  NegativeWeight,
  NonFiniteValue,
  FlagCountMismatch,
  NoCoordinates,
  MissingTensor,
  ShapeMismatch,
  InvalidArgument,
  ZeroVariance,
  SingleClassLabels,
  EmptyEval,
  AllAbsent,
  IoFailure,
  UnknownProperty,
  PortInUse,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure the engine reports carries a code so the CLI can map it to an
// exit status and the HTTP layer to a response.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace protattn
