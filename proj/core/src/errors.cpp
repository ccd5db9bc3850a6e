#include "cspnma/errors.hpp"

namespace cspnma {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidMatrix: return "InvalidMatrix";
    case ErrorCode::DimError: return "DimError";
    case ErrorCode::MalformedStudy: return "MalformedStudy";
    case ErrorCode::DisconnectedNetwork: return "DisconnectedNetwork";
    case ErrorCode::NonPsdStudy: return "NonPsdStudy";
    case ErrorCode::CsvParse: return "CsvParse";
    case ErrorCode::UnknownContrast: return "UnknownContrast";
    case ErrorCode::DegenerateInformation: return "DegenerateInformation";
    case ErrorCode::TauNotEstimable: return "TauNotEstimable";
    case ErrorCode::NotInConsistencySubspace: return "NotInConsistencySubspace";
    case ErrorCode::DecompositionFailure: return "DecompositionFailure";
    case ErrorCode::EmptyTarget: return "EmptyTarget";
  }
  return "Unknown";
}

bool is_data_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedStudy:
    case ErrorCode::DisconnectedNetwork:
    case ErrorCode::NonPsdStudy:
    case ErrorCode::CsvParse:
    case ErrorCode::UnknownContrast:
    case ErrorCode::EmptyTarget:
      return true;
    default:
      return false;
  }
}

}  // namespace cspnma
