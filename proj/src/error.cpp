#include "vrpc/error.hpp"

namespace vrpc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kRange: return "range";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kHashMismatch: return "hash_mismatch";
    case ErrorCode::kCorrupt: return "corrupt";
    case ErrorCode::kState: return "state";
  }
  return "unknown";
}

int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return 3;
    case ErrorCode::kParse: return 4;
    case ErrorCode::kShape: return 5;
    case ErrorCode::kRange: return 6;
    case ErrorCode::kConfig: return 7;
    case ErrorCode::kNumeric: return 8;
    case ErrorCode::kHashMismatch: return 9;
    case ErrorCode::kCorrupt: return 10;
    case ErrorCode::kState: return 11;
  }
  return 1;
}

}  // namespace vrpc
