#pragma once

#include <stdexcept>
#include <string>

namespace fincover {

enum class ErrorCode {
  ParseError,
  BacktrackingLoop,
  DanglingDart,
  InvalidGraphCover,
  EmptyWord,
  CommensurableWords,
  NoAdmissiblePairs,
  InconsistentRatios,
  InconsistentClassDensity,
  NoMatching,
  BudgetExhausted,
  NonPositiveSolution,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::BacktrackingLoop: return "BacktrackingLoop";
    case ErrorCode::DanglingDart: return "DanglingDart";
    case ErrorCode::InvalidGraphCover: return "InvalidGraphCover";
    case ErrorCode::EmptyWord: return "EmptyWord";
    case ErrorCode::CommensurableWords: return "CommensurableWords";
    case ErrorCode::NoAdmissiblePairs: return "NoAdmissiblePairs";
    case ErrorCode::InconsistentRatios: return "InconsistentRatios";
    case ErrorCode::InconsistentClassDensity: return "InconsistentClassDensity";
    case ErrorCode::NoMatching: return "NoMatching";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::NonPositiveSolution: return "NonPositiveSolution";
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

}  // namespace fincover
