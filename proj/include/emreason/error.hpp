#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace em {

enum class Errc {
  kUnknownAttribute,
  kMissingFile,
  kDanglingReference,
  kMalformedRow,
  kBadLabel,
  kUnknownSplit,
  kInsufficientExamples,
  kShotCountMismatch,
  kMissingPrior,
  kWrongPriorOrder,
  kMissingArguments,
  kAuthError,
  kRateLimited,
  kBackendUnavailable,
  kResponseMalformed,
  kLengthMismatch,
  kUnknownPairId,
  kUnsupportedFormat,
  kSchemaMismatch,
  kInvalidArgument,
  kTemplateError,
  kConfigError,
};

std::string_view errc_name(Errc code);

/// Every failure raised by the library carries one of the `Errc` kinds so
/// callers can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace em
