#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdss {

enum class ErrorCode {
  InvalidArgument,
  UnmappedLabel,
  DimensionMismatch,
  ClassCountMismatch,
  UnnormalizedInput,
  InvalidVolume,
  EmptyImage,
  InvalidPercent,
  BadImage,
  UnsupportedBitDepth,
  ClassOutOfRange,
  BadMagic,
  ChecksumMismatch,
  TruncatedFile,
  MalformedLine,
  DuplicateId,
  LoadError,
  StrictAbort,
  InfeasibleSpec,
  IoError,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace sdss
