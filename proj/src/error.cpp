#include "emreason/error.hpp"

namespace em {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kUnknownAttribute: return "UnknownAttribute";
    case Errc::kMissingFile: return "MissingFile";
    case Errc::kDanglingReference: return "DanglingReference";
    case Errc::kMalformedRow: return "MalformedRow";
    case Errc::kBadLabel: return "BadLabel";
    case Errc::kUnknownSplit: return "UnknownSplit";
    case Errc::kInsufficientExamples: return "InsufficientExamples";
    case Errc::kShotCountMismatch: return "ShotCountMismatch";
    case Errc::kMissingPrior: return "MissingPrior";
    case Errc::kWrongPriorOrder: return "WrongPriorOrder";
    case Errc::kMissingArguments: return "MissingArguments";
    case Errc::kAuthError: return "AuthError";
    case Errc::kRateLimited: return "RateLimited";
    case Errc::kBackendUnavailable: return "BackendUnavailable";
    case Errc::kResponseMalformed: return "ResponseMalformed";
    case Errc::kLengthMismatch: return "LengthMismatch";
    case Errc::kUnknownPairId: return "UnknownPairId";
    case Errc::kUnsupportedFormat: return "UnsupportedFormat";
    case Errc::kSchemaMismatch: return "SchemaMismatch";
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kTemplateError: return "TemplateError";
    case Errc::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace em
