#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aquaghost {

enum class ErrorCode {
  ParseError,
  TruncatedFile,
  IoError,
  InvalidArgument,
  InvalidSparsity,
  UnknownPreset,
  TooLarge,
  WrongPatternKind,
  ShapeError,
  InvalidRate,
  DegenerateDictionary,
  IllConditionedActiveSet,
  NumericalDivergence,
  MismatchedM,
  OracleTooLarge,
  ImageTooSmall,
  PairingError,
  SpecError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidSparsity: return "InvalidSparsity";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::WrongPatternKind: return "WrongPatternKind";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::InvalidRate: return "InvalidRate";
    case ErrorCode::DegenerateDictionary: return "DegenerateDictionary";
    case ErrorCode::IllConditionedActiveSet: return "IllConditionedActiveSet";
    case ErrorCode::NumericalDivergence: return "NumericalDivergence";
    case ErrorCode::MismatchedM: return "MismatchedM";
    case ErrorCode::OracleTooLarge: return "OracleTooLarge";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::PairingError: return "PairingError";
    case ErrorCode::SpecError: return "SpecError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace aquaghost
