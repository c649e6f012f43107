#include "sur/error.hpp"

namespace sur {

std::string_view error_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::DuplicateExtractorName: return "DuplicateExtractorName";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::MalformedCsv: return "MalformedCsv";
    case ErrorKind::UnknownExtractor: return "UnknownExtractor";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::InsufficientItems: return "InsufficientItems";
    case ErrorKind::InsufficientClasses: return "InsufficientClasses";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::MissingLambdaTrace: return "MissingLambdaTrace";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(error_name(kind)) + ": " + message), kind_(kind) {}

}  // namespace sur
