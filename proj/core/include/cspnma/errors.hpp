#pragma once

#include <stdexcept>
#include <string>

namespace cspnma {

// Stable machine-readable codes; the CLI prints them on stderr and maps
// data-shaped failures to exit 2, numerical failures to exit 3.
enum class ErrorCode {
  InvalidMatrix,
  DimError,
  MalformedStudy,
  DisconnectedNetwork,
  NonPsdStudy,
  CsvParse,
  UnknownContrast,
  DegenerateInformation,
  TauNotEstimable,
  NotInConsistencySubspace,
  DecompositionFailure,
  EmptyTarget,
};

const char* to_string(ErrorCode code);

// Data errors are problems with the input; everything else is numerical.
bool is_data_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace cspnma
