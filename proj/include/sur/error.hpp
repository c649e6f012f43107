#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sur {

enum class ErrorKind {
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  DuplicateExtractorName,
  LabelOutOfRange,
  MalformedCsv,
  UnknownExtractor,
  DimensionMismatch,
  EmptyClass,
  InsufficientItems,
  InsufficientClasses,
  EmptyInput,
  MissingLambdaTrace,
  InvalidArgument,
  IoError,
};

std::string_view error_name(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can report a stable error name.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return error_name(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace sur
