#pragma once

#include <stdexcept>
#include <string>

namespace treespin {

enum class ErrorCode {
  NonErgodicKernel,
  NonNormalizable,
  InvalidParams,
  TooLarge,
  ZeroProbabilityBoundary,
  DegenerateDenominator,
  InconsistentBoundary,
  NotColoringModel,
  EmptyGoodSet,
  NotReversible,
  NonErgodicChain,
  NegativeFunction,
  PreconditionNotMet,
  ParseError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonErgodicKernel: return "NonErgodicKernel";
    case ErrorCode::NonNormalizable: return "NonNormalizable";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::ZeroProbabilityBoundary: return "ZeroProbabilityBoundary";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::InconsistentBoundary: return "InconsistentBoundary";
    case ErrorCode::NotColoringModel: return "NotColoringModel";
    case ErrorCode::EmptyGoodSet: return "EmptyGoodSet";
    case ErrorCode::NotReversible: return "NotReversible";
    case ErrorCode::NonErgodicChain: return "NonErgodicChain";
    case ErrorCode::NegativeFunction: return "NegativeFunction";
    case ErrorCode::PreconditionNotMet: return "PreconditionNotMet";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace treespin
