#pragma once

#include <stdexcept>
#include <string>

namespace wmattack {

enum class ErrorCode {
  MissingFile,
  MalformedPng,
  UnsupportedBitDepth,
  UnsupportedColorType,
  UnwritablePath,
  InvalidImage,
  DimensionMismatch,
  CapacityExceeded,
  LengthMismatch,
  InvalidArgument,
  MalformedJson,
  UnknownField,
  NonFiniteValue,
  EmptyInput,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "missing file";
    case ErrorCode::MalformedPng: return "malformed PNG";
    case ErrorCode::UnsupportedBitDepth: return "unsupported bit depth";
    case ErrorCode::UnsupportedColorType: return "unsupported color type";
    case ErrorCode::UnwritablePath: return "unwritable path";
    case ErrorCode::InvalidImage: return "invalid image";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::CapacityExceeded: return "capacity exceeded";
    case ErrorCode::LengthMismatch: return "length mismatch";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::MalformedJson: return "malformed JSON";
    case ErrorCode::UnknownField: return "unknown field";
    case ErrorCode::NonFiniteValue: return "non-finite value";
    case ErrorCode::EmptyInput: return "empty input";
  }
  return "error";
}

// Every failure in the library surfaces as this exception; the code
// distinguishes the cases callers are expected to branch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wmattack
