#pragma once
// Error type shared by every riskradar module.
//
// Operations that can fail in ways the caller must handle throw
// riskradar::Error carrying an ErrorCode. Record-level parse defects in the
// news parsers are values (ParseError), not exceptions.

#include <stdexcept>
#include <string>
#include <string_view>

namespace riskradar {

enum class ErrorCode {
  InvalidInput,
  ExtractionFailed,
  InsufficientStructure,
  EmptyKeywordSet,
  DimensionMismatch,
  MalformedResponse,
  Network,
  SizeCapExceeded,
  BadArchive,
  Io,
  Config,
  Store,
  NotFound,
  Usage,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid input";
    case ErrorCode::ExtractionFailed: return "extraction failed";
    case ErrorCode::InsufficientStructure: return "insufficient structure";
    case ErrorCode::EmptyKeywordSet: return "empty keyword set";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::MalformedResponse: return "malformed response";
    case ErrorCode::Network: return "network failure";
    case ErrorCode::SizeCapExceeded: return "size cap exceeded";
    case ErrorCode::BadArchive: return "bad archive";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::Config: return "config error";
    case ErrorCode::Store: return "store error";
    case ErrorCode::NotFound: return "not found";
    case ErrorCode::Usage: return "usage error";
  }
  return "unknown error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// CLI exit codes: 0 success, 1 usage, 2 data error, 3 network error.
constexpr int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage:
      return 1;
    case ErrorCode::Network:
      return 3;
    default:
      return 2;
  }
}

}  // namespace riskradar
