#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace xidx {

enum class ErrorCode {
  MalformedXml,
  UnsupportedConstruct,
  UnknownNode,
  PathSyntaxError,
  CrossDocument,
  UnsortedInput,
  DocHashMismatch,
  IndexFormat,
  DanglingParent,
  DuplicateMemberId,
  SchemaViolation,
  DanglingRef,
  MissingDimensionRef,
  NonNumericMeasure,
  UnknownAttribute,
  EmptyLevel,
  SchemaMismatch,
  InvalidQuery,
  ParamOutOfRange,
  ConfigError,
  CorrectnessFailure,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::UnsupportedConstruct: return "UnsupportedConstruct";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::PathSyntaxError: return "PathSyntaxError";
    case ErrorCode::CrossDocument: return "CrossDocument";
    case ErrorCode::UnsortedInput: return "UnsortedInput";
    case ErrorCode::DocHashMismatch: return "DocHashMismatch";
    case ErrorCode::IndexFormat: return "IndexFormat";
    case ErrorCode::DanglingParent: return "DanglingParent";
    case ErrorCode::DuplicateMemberId: return "DuplicateMemberId";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DanglingRef: return "DanglingRef";
    case ErrorCode::MissingDimensionRef: return "MissingDimensionRef";
    case ErrorCode::NonNumericMeasure: return "NonNumericMeasure";
    case ErrorCode::UnknownAttribute: return "UnknownAttribute";
    case ErrorCode::EmptyLevel: return "EmptyLevel";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::InvalidQuery: return "InvalidQuery";
    case ErrorCode::ParamOutOfRange: return "ParamOutOfRange";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::CorrectnessFailure: return "CorrectnessFailure";
  }
  return "Unknown";
}

// All library failures are reported through this exception. `position` is a
// byte offset into the offending input when one is meaningful.
class Error : public std::runtime_error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  Error(ErrorCode code, const std::string& what, std::size_t position = npos)
      : std::runtime_error(format(code, what, position)),
        code_(code),
        position_(position) {}

  ErrorCode code() const noexcept { return code_; }
  std::size_t position() const noexcept { return position_; }

 private:
  static std::string format(ErrorCode code, const std::string& what,
                            std::size_t position) {
    std::string out(to_string(code));
    if (position != npos) out += " at offset " + std::to_string(position);
    out += ": ";
    out += what;
    return out;
  }

  ErrorCode code_;
  std::size_t position_;
};

}  // namespace xidx
